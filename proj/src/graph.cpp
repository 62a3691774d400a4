#include "plapf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace plapf {

namespace fs = std::filesystem;

Graph::Graph(int n_nodes, std::vector<Edge> edges, bool directed)
    : n_(n_nodes), directed_(directed), edges_(std::move(edges)) {
  if (n_ <= 0) throw InvalidGraphError("graph must have at least one node");

  std::unordered_set<std::int64_t> seen;
  seen.reserve(edges_.size());
  for (const Edge& e : edges_) {
    if (e.src < 0 || e.src >= n_ || e.dst < 0 || e.dst >= n_)
      throw InvalidGraphError("edge (" + std::to_string(e.src) + ", " +
                              std::to_string(e.dst) + ") out of range for " +
                              std::to_string(n_) + " nodes");
    if (e.weight < 0.0 || !std::isfinite(e.weight))
      throw InvalidGraphError("edge (" + std::to_string(e.src) + ", " +
                              std::to_string(e.dst) + ") has invalid weight " +
                              std::to_string(e.weight));
    std::int64_t a = e.src, b = e.dst;
    if (!directed_ && a > b) std::swap(a, b);
    std::int64_t key = a * static_cast<std::int64_t>(n_) + b;
    if (!seen.insert(key).second)
      throw InvalidGraphError("duplicate edge (" + std::to_string(e.src) + ", " +
                              std::to_string(e.dst) + ")");
  }

  std::vector<int> counts(n_, 0);
  for (const Edge& e : edges_) {
    ++counts[e.src];
    if (!directed_ && e.src != e.dst) ++counts[e.dst];
  }
  adj_offsets_.assign(n_ + 1, 0);
  std::partial_sum(counts.begin(), counts.end(), adj_offsets_.begin() + 1);
  adj_.resize(adj_offsets_.back());
  std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (const Edge& e : edges_) {
    adj_[cursor[e.src]++] = Neighbor{e.dst, e.weight};
    if (!directed_ && e.src != e.dst) adj_[cursor[e.dst]++] = Neighbor{e.src, e.weight};
  }

  degrees_ = DegreeVector::Zero(n_);
  for (int i = 0; i < n_; ++i)
    for (const Neighbor& nb : out_neighbors(i)) degrees_[i] += nb.weight;
  inv_sqrt_deg_.resize(n_);
  for (int i = 0; i < n_; ++i)
    inv_sqrt_deg_[i] = degrees_[i] > 0.0 ? 1.0 / std::sqrt(degrees_[i]) : 0.0;
}

std::span<const Neighbor> Graph::out_neighbors(int i) const {
  return {adj_.data() + adj_offsets_[i],
          static_cast<std::size_t>(adj_offsets_[i + 1] - adj_offsets_[i])};
}

Eigen::SparseMatrix<double> Graph::weight_matrix() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(adj_.size());
  for (int i = 0; i < n_; ++i)
    for (const Neighbor& nb : out_neighbors(i)) triplets.emplace_back(i, nb.node, nb.weight);
  Eigen::SparseMatrix<double> W(n_, n_);
  W.setFromTriplets(triplets.begin(), triplets.end());
  return W;
}

Graph Graph::symmetrized() const {
  if (!directed_) return *this;
  std::unordered_map<std::int64_t, double> acc;
  for (const Edge& e : edges_) {
    std::int64_t a = e.src, b = e.dst;
    if (a > b) std::swap(a, b);
    acc[a * static_cast<std::int64_t>(n_) + b] += 0.5 * e.weight;
  }
  std::vector<Edge> sym;
  sym.reserve(acc.size());
  for (const auto& [key, w] : acc)
    sym.push_back(Edge{static_cast<int>(key / n_), static_cast<int>(key % n_), w});
  std::sort(sym.begin(), sym.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  return Graph(n_, std::move(sym), false);
}

NormalizedLaplacian::NormalizedLaplacian(const Graph& g)
    : n_(g.n_nodes()), symmetric_(!g.directed()) {
  const Eigen::VectorXd& isd = g.inv_sqrt_degrees();
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < n_; ++i)
    for (const Neighbor& nb : g.out_neighbors(i))
      triplets.emplace_back(i, nb.node, nb.weight * isd[i] * isd[nb.node]);
  adj_.resize(n_, n_);
  adj_.setFromTriplets(triplets.begin(), triplets.end());
  adj_t_ = symmetric_ ? adj_ : Eigen::SparseMatrix<double>(adj_.transpose());
  diag_mask_.resize(n_);
  for (int i = 0; i < n_; ++i) diag_mask_[i] = g.degrees()[i] > 0.0 ? 1.0 : 0.0;
}

Eigen::MatrixXd NormalizedLaplacian::apply(const Eigen::MatrixXd& X) const {
  if (X.rows() != n_)
    throw ShapeError("laplacian of size " + std::to_string(n_) + " applied to " +
                     std::to_string(X.rows()) + " rows");
  return diag_mask_.asDiagonal() * X - adj_ * X;
}

Eigen::MatrixXd NormalizedLaplacian::apply_transpose(const Eigen::MatrixXd& X) const {
  if (X.rows() != n_)
    throw ShapeError("laplacian of size " + std::to_string(n_) + " applied to " +
                     std::to_string(X.rows()) + " rows");
  return diag_mask_.asDiagonal() * X - adj_t_ * X;
}

Eigen::MatrixXd NormalizedLaplacian::dense() const {
  Eigen::MatrixXd L = -Eigen::MatrixXd(adj_);
  L.diagonal() += diag_mask_;
  return L;
}

NormalizedLaplacian normalized_laplacian(const Graph& g) { return NormalizedLaplacian(g); }

double homophily(const Graph& g, const Eigen::VectorXi& labels) {
  if (labels.size() != g.n_nodes())
    throw ShapeError("labels length " + std::to_string(labels.size()) +
                     " does not match " + std::to_string(g.n_nodes()) + " nodes");
  double sum = 0.0;
  int counted = 0;
  for (int i = 0; i < g.n_nodes(); ++i) {
    auto nbs = g.out_neighbors(i);
    if (nbs.empty()) continue;  // per-node fraction undefined, excluded
    int same = 0;
    for (const Neighbor& nb : nbs)
      if (labels[nb.node] == labels[i]) ++same;
    sum += static_cast<double>(same) / static_cast<double>(nbs.size());
    ++counted;
  }
  if (counted == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / counted;
}

int Dataset::n_classes() const {
  return labels.size() == 0 ? 0 : labels.maxCoeff() + 1;
}

void Dataset::validate() const {
  const int n = graph.n_nodes();
  if (features.rows() != n)
    throw LoadError("feature rows (" + std::to_string(features.rows()) +
                    ") do not match node count (" + std::to_string(n) + ")");
  if (labels.size() != n) throw LoadError("labels do not cover every node");
  if (labels.minCoeff() < 0) throw LoadError("negative class id");
  std::vector<bool> present(n_classes(), false);
  for (int i = 0; i < n; ++i) present[labels[i]] = true;
  for (std::size_t c = 0; c < present.size(); ++c)
    if (!present[c]) throw LoadError("class " + std::to_string(c) + " has no nodes");
  if (!train_mask.empty()) {
    if (static_cast<int>(train_mask.size()) != n || val_mask.size() != train_mask.size() ||
        test_mask.size() != train_mask.size())
      throw LoadError("mask length does not match node count");
    for (int i = 0; i < n; ++i)
      if (train_mask[i] + val_mask[i] + test_mask[i] > 1)
        throw LoadError("masks overlap at node " + std::to_string(i));
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& tok, const fs::path& file, int lineno) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw LoadError(file.string() + ":" + std::to_string(lineno) +
                    ": expected a real number, got '" + tok + "'");
  }
}

int parse_id(const std::string& tok, const fs::path& file, int lineno) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw LoadError(file.string() + ":" + std::to_string(lineno) +
                    ": expected an integer, got '" + tok + "'");
  }
}

std::ifstream open_or_throw(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot open");
  return in;
}

std::vector<std::uint8_t> mask_from_ids(const nlohmann::json& ids, int n,
                                        const fs::path& file, const char* key) {
  std::vector<std::uint8_t> mask(n, 0);
  for (const auto& v : ids) {
    if (!v.is_number_integer())
      throw LoadError(file.string() + ": non-integer id in '" + key + "'");
    int id = v.get<int>();
    if (id < 0 || id >= n)
      throw LoadError(file.string() + ": id " + std::to_string(id) + " in '" + key +
                      "' out of range");
    mask[id] = 1;
  }
  return mask;
}

}  // namespace

Dataset load_dataset(const fs::path& dir, bool directed) {
  const fs::path features_file = dir / "features.csv";
  const fs::path edges_file = dir / "edges.csv";
  const fs::path labels_file = dir / "labels.csv";
  const fs::path splits_file = dir / "splits.json";

  // features.csv fixes the node count.
  std::vector<std::vector<double>> rows;
  {
    std::ifstream in = open_or_throw(features_file);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto toks = split_line(line);
      std::vector<double> row;
      row.reserve(toks.size());
      for (const auto& t : toks) row.push_back(parse_real(t, features_file, lineno));
      if (!rows.empty() && row.size() != rows.front().size())
        throw LoadError(features_file.string() + ":" + std::to_string(lineno) +
                        ": ragged row (" + std::to_string(row.size()) + " vs " +
                        std::to_string(rows.front().size()) + " columns)");
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw LoadError(features_file.string() + ": no feature rows");
  }
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd features(n, static_cast<int>(rows.front().size()));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < features.cols(); ++j) features(i, j) = rows[i][j];

  std::vector<Edge> edges;
  {
    std::ifstream in = open_or_throw(edges_file);
    std::string line;
    if (!std::getline(in, line))
      throw LoadError(edges_file.string() + ": missing header");
    auto header = split_line(line);
    if (header.size() < 2 || header[0] != "src" || header[1] != "dst")
      throw LoadError(edges_file.string() + ":1: header must start with 'src,dst'");
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto toks = split_line(line);
      if (toks.size() != 2 && toks.size() != 3)
        throw LoadError(edges_file.string() + ":" + std::to_string(lineno) +
                        ": expected 2 or 3 columns");
      Edge e;
      e.src = parse_id(toks[0], edges_file, lineno);
      e.dst = parse_id(toks[1], edges_file, lineno);
      e.weight = toks.size() == 3 ? parse_real(toks[2], edges_file, lineno) : 1.0;
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
        throw LoadError(edges_file.string() + ":" + std::to_string(lineno) +
                        ": node id out of range");
      edges.push_back(e);
    }
  }

  Eigen::VectorXi labels = Eigen::VectorXi::Constant(n, -1);
  {
    std::ifstream in = open_or_throw(labels_file);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto toks = split_line(line);
      if (lineno == 1 && toks.size() == 2 && toks[0] == "node") continue;
      if (toks.size() != 2)
        throw LoadError(labels_file.string() + ":" + std::to_string(lineno) +
                        ": expected 'node,label'");
      int id = parse_id(toks[0], labels_file, lineno);
      int label = parse_id(toks[1], labels_file, lineno);
      if (id < 0 || id >= n)
        throw LoadError(labels_file.string() + ":" + std::to_string(lineno) +
                        ": node id out of range");
      if (labels[id] != -1)
        throw LoadError(labels_file.string() + ":" + std::to_string(lineno) +
                        ": duplicate label for node " + std::to_string(id));
      labels[id] = label;
    }
    for (int i = 0; i < n; ++i)
      if (labels[i] == -1)
        throw LoadError(labels_file.string() + ": no label for node " + std::to_string(i));
  }

  Graph graph = [&] {
    try {
      return Graph(n, std::move(edges), directed);
    } catch (const InvalidGraphError& e) {
      throw LoadError(edges_file.string() + ": " + e.what());
    }
  }();

  Dataset ds{std::move(graph), std::move(features), std::move(labels), {}, {}, {}};

  if (fs::exists(splits_file)) {
    std::ifstream in = open_or_throw(splits_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(splits_file.string() + ": " + e.what());
    }
    for (const char* key : {"train", "val", "test"})
      if (!j.contains(key) || !j[key].is_array())
        throw LoadError(splits_file.string() + ": missing array '" + key + "'");
    ds.train_mask = mask_from_ids(j["train"], n, splits_file, "train");
    ds.val_mask = mask_from_ids(j["val"], n, splits_file, "val");
    ds.test_mask = mask_from_ids(j["test"], n, splits_file, "test");
  }

  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  char buf[64];

  {
    std::ofstream out(dir / "edges.csv");
    out << "src,dst,weight\n";
    for (const Edge& e : ds.graph.edges()) {
      std::snprintf(buf, sizeof buf, "%.17g", e.weight);
      out << e.src << ',' << e.dst << ',' << buf << '\n';
    }
  }
  {
    std::ofstream out(dir / "features.csv");
    for (int i = 0; i < ds.features.rows(); ++i) {
      for (int j = 0; j < ds.features.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
        out << (j ? "," : "") << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    out << "node,label\n";
    for (int i = 0; i < ds.labels.size(); ++i) out << i << ',' << ds.labels[i] << '\n';
  }
  if (ds.has_masks()) {
    nlohmann::json j;
    for (auto [key, mask] : {std::pair<const char*, const std::vector<std::uint8_t>*>{
                                 "train", &ds.train_mask},
                             {"val", &ds.val_mask},
                             {"test", &ds.test_mask}}) {
      auto ids = nlohmann::json::array();
      for (std::size_t i = 0; i < mask->size(); ++i)
        if ((*mask)[i]) ids.push_back(i);
      j[key] = std::move(ids);
    }
    std::ofstream out(dir / "splits.json");
    out << j.dump(2) << '\n';
  }
}

Dataset random_split(const Dataset& ds, std::array<double, 3> ratios,
                     std::uint64_t seed) {
  for (double r : ratios)
    if (r < 0.0 || !std::isfinite(r)) throw SplitError("split ratios must be nonnegative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw SplitError("split ratios must sum to 1");
  if (ratios[0] <= 0.0) throw SplitError("train ratio must be positive");

  const int n = ds.graph.n_nodes();
  std::vector<std::vector<int>> by_class(ds.n_classes());
  for (int i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);

  Dataset out = ds;
  out.train_mask.assign(n, 0);
  out.val_mask.assign(n, 0);
  out.test_mask.assign(n, 0);

  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_c = static_cast<double>(ids.size());
    const int n_train = static_cast<int>(std::floor(ratios[0] * n_c));
    const int n_train_val = static_cast<int>(std::floor((ratios[0] + ratios[1]) * n_c));
    if (n_train < 1)
      throw SplitError("class " + std::to_string(c) + " has too few nodes (" +
                       std::to_string(ids.size()) + ") to appear in train");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (static_cast<int>(i) < n_train)
        out.train_mask[ids[i]] = 1;
      else if (static_cast<int>(i) < n_train_val)
        out.val_mask[ids[i]] = 1;
      else
        out.test_mask[ids[i]] = 1;
    }
  }
  return out;
}

}  // namespace plapf
