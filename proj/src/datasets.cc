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

#include "ftl/datasets.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace ftl::data {
namespace {

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t comma = line.find(',', start);
    out.push_back(Trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double ParseCell(const std::string& cell, int row, const std::string& col) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
      !std::isfinite(v)) {
    throw DataError("non-numeric cell '" + cell + "' at row " +
                    std::to_string(row) + ", column " + col);
  }
  return v;
}

int ColumnIndex(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing column " + name);
  return static_cast<int>(it - header.begin());
}

std::string FormatLevel(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Dataset ParseCsv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  const std::vector<std::string> header = SplitLine(line);
  const int label_col = ColumnIndex(header, schema.label_column);
  const int id_col =
      schema.id_column.empty() ? -1 : ColumnIndex(header, schema.id_column);
  std::set<int> categorical, dropped;
  for (const auto& c : schema.categorical) categorical.insert(ColumnIndex(header, c));
  for (const auto& c : schema.drop) dropped.insert(ColumnIndex(header, c));

  std::vector<std::vector<double>> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (Trim(line).empty()) continue;
    std::vector<std::string> cells = SplitLine(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      if (dropped.count(static_cast<int>(c))) continue;
      values[c] = ParseCell(cells[c], row, header[c]);
    }
    rows.push_back(std::move(values));
  }

  // Output columns in header order, categorical columns expanded in place.
  struct OutCol {
    int src;
    bool indicator;
    double level;
  };
  std::vector<OutCol> cols;
  Dataset d;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c == label_col || c == id_col || dropped.count(c)) continue;
    if (categorical.count(c)) {
      std::set<double> levels;
      for (const auto& r : rows) levels.insert(r[c]);
      for (double lv : levels) {
        cols.push_back({c, true, lv});
        d.feature_names.push_back(header[c] + "=" + FormatLevel(lv));
      }
    } else {
      cols.push_back({c, false, 0});
      d.feature_names.push_back(header[c]);
    }
  }
  d.x.resize(rows.size(), cols.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t k = 0; k < cols.size(); ++k) {
      const OutCol& oc = cols[k];
      d.x(r, k) = oc.indicator ? (rows[r][oc.src] == oc.level ? 1.0 : 0.0)
                               : rows[r][oc.src];
    }
    d.y.push_back(rows[r][label_col] == schema.positive_label ? 1 : -1);
    d.ids.push_back(id_col >= 0 ? static_cast<int64_t>(rows[r][id_col])
                                : static_cast<int64_t>(r));
  }
  return d;
}

Dataset LoadCsv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ParseCsv(in, schema);
}

void WriteCsv(const Dataset& d, std::ostream& out,
              const std::string& label_column) {
  for (const auto& name : d.feature_names) out << name << ",";
  out << label_column << "\n";
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.x.cols(); ++c) out << d.x(r, c) << ",";
    out << d.y[r] << "\n";
  }
}

FeatureAssignment HalfSplit(int num_cols) {
  FeatureAssignment fa;
  const int half = (num_cols + 1) / 2;
  for (int c = 0; c < num_cols; ++c) (c < half ? fa.a_cols : fa.b_cols).push_back(c);
  return fa;
}

std::vector<int> FederationSplit::UnlabeledB() const {
  std::vector<bool> labeled(n_b(), false);
  for (int r : labeled_b) labeled[r] = true;
  std::vector<int> out;
  for (int r = 0; r < n_b(); ++r) {
    if (!labeled[r]) out.push_back(r);
  }
  return out;
}

objective::Instance FederationSplit::ToInstance() const {
  objective::Instance inst;
  inst.y_a = y_a;
  for (int r : labeled_b) inst.labeled.push_back({r, y_b[r]});
  inst.overlap = overlap;
  return inst;
}

namespace {

Matrix Columns(const Matrix& x, const std::vector<int>& rows,
               const std::vector<int>& cols) {
  Matrix out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = x(rows[i], cols[j]);
  }
  return out;
}

}  // namespace

FederationSplit VerticalSplit(const Dataset& data, const FeatureAssignment& fa,
                              const SplitOptions& o) {
  const int n = static_cast<int>(data.x.rows());
  const int ncols = static_cast<int>(data.x.cols());
  if (fa.a_cols.empty() || fa.b_cols.empty()) {
    throw DataError("each party needs at least one feature");
  }
  std::set<int> seen;
  for (const auto* cols : {&fa.a_cols, &fa.b_cols}) {
    for (int c : *cols) {
      if (c < 0 || c >= ncols) throw DataError("feature index out of range");
      if (!seen.insert(c).second) throw DataError("feature assigned twice");
    }
  }
  for (double v : {o.a_share, o.b_share, o.overlap_fraction, o.label_fraction}) {
    if (!(v >= 0 && v <= 1)) throw DataError("fractions must lie in [0, 1]");
  }
  const int n_a = static_cast<int>(std::lround(o.a_share * n));
  const int n_b = static_cast<int>(std::lround(o.b_share * n));
  if (n_a == 0 || n_b == 0) throw DataError("a party would hold no samples");
  const int n_ab = o.overlap_count >= 0
                       ? o.overlap_count
                       : static_cast<int>(std::lround(o.overlap_fraction *
                                                      std::min(n_a, n_b)));
  if (n_ab > std::min(n_a, n_b)) throw DataError("overlap larger than a party");
  if (n_a + n_b - n_ab > n) {
    throw DataError("N_A + N_B - N_AB exceeds the number of samples");
  }
  const int n_c = o.label_count >= 0
                      ? o.label_count
                      : static_cast<int>(std::lround(o.label_fraction * n_b));
  if (n_c > n_b) throw DataError("more labeled B samples than B holds");

  std::mt19937_64 rng(o.seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  // A: perm[0, n_a); B: perm[n_a - n_ab, n_a - n_ab + n_b).
  std::vector<int> rows_a(perm.begin(), perm.begin() + n_a);
  std::vector<int> rows_b(perm.begin() + (n_a - n_ab),
                          perm.begin() + (n_a - n_ab + n_b));
  std::shuffle(rows_b.begin(), rows_b.end(), rng);

  FederationSplit s;
  s.features = fa;
  s.x_a = Columns(data.x, rows_a, fa.a_cols);
  s.x_b = Columns(data.x, rows_b, fa.b_cols);
  std::map<int, int> b_pos;
  for (int i = 0; i < n_b; ++i) {
    s.ids_b.push_back(data.ids[rows_b[i]]);
    s.y_b.push_back(data.y[rows_b[i]]);
    b_pos[rows_b[i]] = i;
  }
  for (int i = 0; i < n_a; ++i) {
    s.ids_a.push_back(data.ids[rows_a[i]]);
    s.y_a.push_back(data.y[rows_a[i]]);
    auto it = b_pos.find(rows_a[i]);
    if (it != b_pos.end()) s.overlap.push_back({i, it->second});
  }
  std::vector<int> b_order(n_b);
  std::iota(b_order.begin(), b_order.end(), 0);
  std::shuffle(b_order.begin(), b_order.end(), rng);
  s.labeled_b.assign(b_order.begin(), b_order.begin() + n_c);
  std::sort(s.labeled_b.begin(), s.labeled_b.end());
  CheckSplit(s);
  return s;
}

void CheckSplit(const FederationSplit& s) {
  if (s.y_a.size() != size_t(s.n_a()) || s.ids_a.size() != size_t(s.n_a()) ||
      s.y_b.size() != size_t(s.n_b()) || s.ids_b.size() != size_t(s.n_b())) {
    throw DataError("split arrays disagree in length");
  }
  for (const auto* ys : {&s.y_a, &s.y_b}) {
    for (int y : *ys) {
      if (y != 1 && y != -1) throw DataError("labels must be +-1");
    }
  }
  for (const auto& p : s.overlap) {
    if (p.a_row < 0 || p.a_row >= s.n_a() || p.b_row < 0 || p.b_row >= s.n_b() ||
        s.ids_a[p.a_row] != s.ids_b[p.b_row]) {
      throw DataError("overlap pair does not join equal ids");
    }
  }
  std::set<int> c;
  for (int r : s.labeled_b) {
    if (r < 0 || r >= s.n_b() || !c.insert(r).second) {
      throw DataError("labeled set is not a set of B rows");
    }
  }
  std::set<int> a(s.features.a_cols.begin(), s.features.a_cols.end());
  for (int col : s.features.b_cols) {
    if (a.count(col)) throw DataError("feature spaces overlap");
  }
}

TwoView SynthTwoView(const SynthOptions& o) {
  if (o.n < 4) throw DataError("synthetic data needs n >= 4");
  if (o.identity_maps && (o.d_a != o.latent || o.d_b != o.latent)) {
    throw DataError("identity maps need d_a == d_b == latent");
  }
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = scale * normal(rng);
    }
    return m;
  };
  TwoView t;
  if (o.identity_maps) {
    t.w_a = Matrix::Identity(o.latent, o.latent);
    t.w_b = Matrix::Identity(o.latent, o.latent);
  } else {
    t.w_a = gaussian(o.d_a, o.latent, 1.0 / std::sqrt(o.latent));
    t.w_b = gaussian(o.d_b, o.latent, 1.0 / std::sqrt(o.latent));
  }
  t.w = gaussian(o.latent, 1, 1.0);
  t.z = gaussian(o.n, o.latent, 1.0);
  if (o.margin > 0) {
    const Vector dir = t.w.col(0).normalized();
    for (int i = 0; i < o.n; ++i) {
      const double side = t.z.row(i).dot(dir) >= 0 ? 1.0 : -1.0;
      t.z.row(i) += side * o.margin * dir.transpose();
    }
  }
  Matrix xa = t.z * t.w_a.transpose() + gaussian(o.n, o.d_a, o.noise);
  Matrix xb = t.z * t.w_b.transpose() +
              gaussian(o.n, o.d_b, o.noise_b >= 0 ? o.noise_b : o.noise);
  t.data.x.resize(o.n, o.d_a + o.d_b);
  t.data.x << xa, xb;
  std::bernoulli_distribution flip(o.label_noise);
  for (int i = 0; i < o.n; ++i) {
    int y = t.z.row(i).dot(t.w.col(0)) >= 0 ? 1 : -1;
    if (o.label_noise > 0 && flip(rng)) y = -y;
    t.data.y.push_back(y);
    t.data.ids.push_back(i);
  }
  for (int j = 0; j < o.d_a; ++j) t.data.feature_names.push_back("a" + std::to_string(j));
  for (int j = 0; j < o.d_b; ++j) t.data.feature_names.push_back("b" + std::to_string(j));
  for (int j = 0; j < o.d_a; ++j) t.features.a_cols.push_back(j);
  for (int j = 0; j < o.d_b; ++j) t.features.b_cols.push_back(o.d_a + j);
  return t;
}

Dataset ShuffleLabels(const Dataset& d, uint64_t seed) {
  Dataset out = d;
  std::mt19937_64 rng(seed);
  std::shuffle(out.y.begin(), out.y.end(), rng);
  return out;
}

MetricReport WeightedF1(const std::vector<int>& pred,
                        const std::vector<int>& truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw DataError("weighted F1 needs equal, non-empty label vectors");
  }
  MetricReport m;
  for (size_t i = 0; i < pred.size(); ++i) {
    if ((pred[i] != 1 && pred[i] != -1) || (truth[i] != 1 && truth[i] != -1)) {
      throw DataError("labels must be +-1");
    }
    if (truth[i] == 1) {
      (pred[i] == 1 ? m.tp : m.fn) += 1;
    } else {
      (pred[i] == 1 ? m.fp : m.tn) += 1;
    }
  }
  auto stats = [](int label, int tp, int fp, int fn) {
    ClassStats c;
    c.label = label;
    c.support = tp + fn;
    c.precision = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    c.recall = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    c.f1 = c.precision + c.recall > 0
               ? 2 * c.precision * c.recall / (c.precision + c.recall)
               : 0.0;
    return c;
  };
  m.per_class = {stats(1, m.tp, m.fp, m.fn), stats(-1, m.tn, m.fn, m.fp)};
  const double n = static_cast<double>(pred.size());
  for (const ClassStats& c : m.per_class) m.weighted_f1 += c.support / n * c.f1;
  return m;
}

Dataset Subset(const Dataset& d, const std::vector<int>& rows) {
  Dataset out;
  out.feature_names = d.feature_names;
  out.x.resize(rows.size(), d.x.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.x.row(i) = d.x.row(rows[i]);
    out.y.push_back(d.y[rows[i]]);
    out.ids.push_back(d.ids[rows[i]]);
  }
  return out;
}

Dataset BalancedResample(const Dataset& d, uint64_t seed) {
  std::vector<int> pos, neg;
  for (size_t i = 0; i < d.y.size(); ++i) (d.y[i] == 1 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<int>& big = pos.size() > neg.size() ? pos : neg;
  const size_t keep = std::min(pos.size(), neg.size());
  std::shuffle(big.begin(), big.end(), rng);
  big.resize(keep);
  std::vector<int> rows = pos;
  rows.insert(rows.end(), neg.begin(), neg.end());
  std::sort(rows.begin(), rows.end());
  return Subset(d, rows);
}

Standardizer Standardizer::Fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale = Vector::Ones(x.cols());
  if (x.rows() > 1) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double var = (x.col(c).array() - s.mean(c)).square().mean();
      if (var > 0) s.scale(c) = std::sqrt(var);
    }
  }
  return s;
}

Matrix Standardizer::Apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ShapeError("standardizer width mismatch");
  Matrix out = x.rowwise() - mean.transpose();
  return out.array().rowwise() / scale.transpose().array();
}

void StandardizeParties(FederationSplit& s) {
  s.x_a = Standardizer::Fit(s.x_a).Apply(s.x_a);
  s.x_b = Standardizer::Fit(s.x_b).Apply(s.x_b);
}

void WriteManifest(const FederationSplit& s, std::ostream& out) {
  auto line = [&](const char* tag, const std::vector<int64_t>& ids) {
    out << tag;
    for (int64_t id : ids) out << " " << id;
    out << "\n";
  };
  std::vector<int64_t> ab, c;
  for (const auto& p : s.overlap) ab.push_back(s.ids_a[p.a_row]);
  for (int r : s.labeled_b) c.push_back(s.ids_b[r]);
  line("A", s.ids_a);
  line("B", s.ids_b);
  line("AB", ab);
  line("C", c);
}

Manifest ReadManifest(std::istream& in) {
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    std::vector<int64_t>* dst = tag == "A"    ? &m.a
                                : tag == "B"  ? &m.b
                                : tag == "AB" ? &m.ab
                                : tag == "C"  ? &m.c
                                              : nullptr;
    if (!dst) throw DataError("unknown manifest set " + tag);
    int64_t id;
    while (ls >> id) dst->push_back(id);
  }
  return m;
}

}  // namespace ftl::data
