/*
 * Copyright 2026 The Secure FTL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FTL_ERRORS_H_
#define FTL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace ftl {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KeyGenError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class KeyError : public Error { using Error::Error; };
class EncodingError : public Error { using Error::Error; };
// Fractional-bit counters of two operands disagree.
class ScaleError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class FramingError : public Error { using Error::Error; };
class TransportError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace ftl

#endif  // FTL_ERRORS_H_
