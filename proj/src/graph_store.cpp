#include "gcope/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gcope/error.hpp"
#include "gcope/rng.hpp"

namespace gcope {
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingFile, "missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on '\n', dropping a trailing empty line and any '\r'.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

template <typename T>
T parse_number(std::string_view tok, const std::string& where) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(ErrorCode::ParseError, "cannot parse '" + std::string(tok) + "' in " + where);
  }
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace

bool GraphDataset::operator==(const GraphDataset& other) const {
  return name == other.name && features == other.features && edges == other.edges &&
         labels == other.labels && num_classes == other.num_classes &&
         adjacency == other.adjacency;
}

GraphDataset make_dataset(std::string name, FeatureMatrix features, std::vector<Edge> edges,
                          std::vector<int> labels, int num_classes) {
  const Index n = features.rows();
  if (num_classes < 1) fail(ErrorCode::InvalidArgument, "num_classes must be positive");
  if (static_cast<Index>(labels.size()) != n) {
    fail(ErrorCode::ShapeMismatch, "label count " + std::to_string(labels.size()) +
                                       " != node count " + std::to_string(n));
  }
  if (!features.allFinite()) fail(ErrorCode::NonFiniteFeature, "dataset " + name + " has non-finite features");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnlabeled && (labels[i] < 0 || labels[i] >= num_classes)) {
      fail(ErrorCode::IndexOutOfRange, "label " + std::to_string(labels[i]) + " of node " +
                                           std::to_string(i) + " outside [0," +
                                           std::to_string(num_classes) + ")");
    }
  }
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) {
      fail(ErrorCode::IndexOutOfRange, "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                           ") outside node range " + std::to_string(n));
    }
    if (u == v) continue;
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  GraphDataset g;
  g.name = std::move(name);
  g.features = std::move(features);
  g.adjacency = Csr::from_undirected(n, canon);
  g.edges = std::move(canon);
  g.labels = std::move(labels);
  g.num_classes = num_classes;
  return g;
}

GraphDataset load_dataset(const fs::path& dir) {
  std::map<std::string, std::string, std::less<>> meta;
  {
    const auto text = read_file(dir / "meta.tsv");
    for (auto line : split_lines(text)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string_view::npos) fail(ErrorCode::ParseError, "meta.tsv line without tab");
      meta[std::string(line.substr(0, tab))] = std::string(line.substr(tab + 1));
    }
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) fail(ErrorCode::ParseError, std::string("meta.tsv missing key ") + key);
    return it->second;
  };
  const std::string name = need("name");
  const Index n = parse_number<Index>(need("num_nodes"), "meta.tsv");
  const int num_classes = parse_number<int>(need("num_classes"), "meta.tsv");
  const Index dim = parse_number<Index>(need("feature_dim"), "meta.tsv");
  if (n < 0 || dim < 1) fail(ErrorCode::ParseError, "meta.tsv: bad num_nodes/feature_dim");

  const auto feat_text = read_file(dir / "features.tsv");
  const auto edge_text = read_file(dir / "edges.tsv");
  const auto label_text = read_file(dir / "labels.tsv");

  FeatureMatrix features(n, dim);
  {
    auto lines = split_lines(feat_text);
    if (static_cast<Index>(lines.size()) != n) {
      fail(ErrorCode::ShapeMismatch, "features.tsv has " + std::to_string(lines.size()) +
                                         " rows, expected " + std::to_string(n));
    }
    for (Index i = 0; i < n; ++i) {
      auto toks = split_tabs(lines[i]);
      if (static_cast<Index>(toks.size()) != dim) {
        fail(ErrorCode::ShapeMismatch, "features.tsv row " + std::to_string(i) + " has " +
                                           std::to_string(toks.size()) + " columns, expected " +
                                           std::to_string(dim));
      }
      for (Index j = 0; j < dim; ++j) {
        const float v = parse_number<float>(toks[j], "features.tsv");
        if (!std::isfinite(v)) {
          fail(ErrorCode::NonFiniteFeature, "features.tsv row " + std::to_string(i) + " is non-finite");
        }
        features(i, j) = v;
      }
    }
  }

  std::vector<Edge> edges;
  for (auto line : split_lines(edge_text)) {
    if (line.empty()) continue;
    auto toks = split_tabs(line);
    if (toks.size() != 2) fail(ErrorCode::ParseError, "edges.tsv line must be u<TAB>v");
    edges.emplace_back(parse_number<Index>(toks[0], "edges.tsv"), parse_number<Index>(toks[1], "edges.tsv"));
  }

  std::vector<int> labels;
  for (auto line : split_lines(label_text)) {
    if (line.empty()) continue;
    labels.push_back(parse_number<int>(line, "labels.tsv"));
  }

  return make_dataset(name, std::move(features), std::move(edges), std::move(labels), num_classes);
}

void write_dataset(const GraphDataset& g, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  auto open = [&](const char* file) {
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / file).string());
    return out;
  };
  {
    auto out = open("meta.tsv");
    out << "name\t" << g.name << '\n'
        << "num_nodes\t" << g.num_nodes() << '\n'
        << "num_classes\t" << g.num_classes << '\n'
        << "feature_dim\t" << g.feature_dim() << '\n';
  }
  {
    auto out = open("features.tsv");
    std::string line;
    for (Index i = 0; i < g.num_nodes(); ++i) {
      line.clear();
      for (Index j = 0; j < g.feature_dim(); ++j) {
        if (j) line.push_back('\t');
        line += format_number(g.features(i, j));
      }
      line.push_back('\n');
      out << line;
    }
  }
  {
    auto out = open("edges.tsv");
    for (auto [u, v] : g.edges) out << u << '\t' << v << '\n';
  }
  {
    auto out = open("labels.tsv");
    for (int l : g.labels) out << l << '\n';
  }
}

GraphDataset synth_dataset(Index n, int num_classes, Index dim, double target_h,
                           std::uint64_t seed, std::string name) {
  if (num_classes < 2 || n < num_classes) {
    fail(ErrorCode::InvalidArgument, "synth_dataset requires n >= classes >= 2");
  }
  if (!(target_h >= 0.0 && target_h <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "target homophily must lie in [0,1]");
  }
  if (dim < 1) fail(ErrorCode::InvalidArgument, "feature dim must be positive");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(num_classes, dim);
  for (Index c = 0; c < num_classes; ++c)
    for (Index j = 0; j < dim; ++j) means(c, j) = normal(rng);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_classes));
  for (Index i = 0; i < n; ++i) members[labels[i]].push_back(i);

  std::uniform_int_distribution<Index> any_node(0, n - 1);
  std::bernoulli_distribution same_class(target_h);

  auto partner = [&](Index u) -> Index {
    const auto& own = members[labels[u]];
    const bool want_same = same_class(rng);
    // A singleton class cannot host an intra-class edge; fall back to inter.
    if (want_same && own.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, own.size() - 2);
      std::size_t k = pick(rng);
      Index v = own[k];
      return v == u ? own.back() : v;
    }
    while (true) {
      Index v = any_node(rng);
      if (labels[v] != labels[u]) return v;
    }
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(2 * n));
  for (Index u = 0; u < n; ++u) edges.emplace_back(u, partner(u));
  for (Index k = 0; k < n; ++k) {
    Index u = any_node(rng);
    edges.emplace_back(u, partner(u));
  }

  FeatureMatrix features(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j)
      features(i, j) = static_cast<float>(means(labels[i], j) + normal(rng));

  return make_dataset(std::move(name), std::move(features), std::move(edges), std::move(labels), num_classes);
}

double compute_homophily(const GraphDataset& g) {
  if (g.edges.empty()) fail(ErrorCode::NoEdges, "homophily undefined for graph " + g.name + " without edges");
  for (int l : g.labels) {
    if (l == kUnlabeled) fail(ErrorCode::UnlabeledNode, "homophily requires every node labeled in " + g.name);
  }
  std::size_t same = 0;
  for (auto [u, v] : g.edges) same += g.labels[u] == g.labels[v] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(g.edges.size());
}

DatasetMeta describe(const GraphDataset& g) {
  DatasetMeta m;
  m.node_count = g.num_nodes();
  m.edge_count = g.adjacency.nnz();
  m.feature_dim = g.feature_dim();
  m.label_count = g.num_classes;
  m.homophily = compute_homophily(g);
  return m;
}

}  // namespace gcope
