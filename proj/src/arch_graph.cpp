#include "mfgrow/arch_graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace mfgrow {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

std::string axis_label(const std::string& weight, Axis a) { return weight + "." + to_string(a); }

}  // namespace

std::string to_string(Parametrization p) {
  switch (p) {
    case Parametrization::SP:
      return "SP";
    case Parametrization::MuP:
      return "muP";
    case Parametrization::MFP:
      return "MFP";
  }
  return "?";
}

Parametrization parse_parametrization(const std::string& s) {
  if (s == "SP" || s == "sp") return Parametrization::SP;
  if (s == "muP" || s == "mup" || s == "MUP") return Parametrization::MuP;
  if (s == "MFP" || s == "mfp" || s == "MF" || s == "mf") return Parametrization::MFP;
  throw ConfigError("unknown parametrization '" + s + "' (expected SP, muP or MFP)");
}

std::string to_string(Axis a) { return a == Axis::Row ? "row" : "col"; }

const WeightDecl& ArchGraph::weight(const std::string& name) const {
  for (const auto& w : weights)
    if (w.name == name) return w;
  throw StructuralError("unknown weight '" + name + "'");
}

bool ArchGraph::has_weight(const std::string& name) const {
  return std::any_of(weights.begin(), weights.end(), [&](const WeightDecl& w) { return w.name == name; });
}

const GammaVar& ArchGraph::gamma(int id) const {
  for (const auto& g : gammas)
    if (g.id == id) return g;
  throw StructuralError("unknown gamma variable " + std::to_string(id));
}

std::vector<int> ArchGraph::gammas_at(const std::string& weight, Axis axis) const {
  std::set<int> ids;
  for (const auto& u : usages)
    if (u.weight == weight && u.axis == axis) ids.insert(u.gamma);
  return {ids.begin(), ids.end()};
}

void ArchGraph::validate() const {
  std::set<int> ids;
  for (const auto& g : gammas) {
    if (!ids.insert(g.id).second) throw StructuralError("duplicate gamma id " + std::to_string(g.id));
    if (g.width < 1) throw StructuralError("gamma " + std::to_string(g.id) + " has width 0");
  }
  std::set<std::string> names;
  for (const auto& w : weights) {
    if (w.name.empty()) throw StructuralError("weight with empty name");
    if (!names.insert(w.name).second) throw StructuralError("duplicate weight '" + w.name + "'");
    const std::size_t rank = w.kind == WeightKind::Matrix ? 2 : 1;
    if (w.shape.size() != rank)
      throw StructuralError("weight '" + w.name + "' has shape of rank " + std::to_string(w.shape.size()));
    for (auto d : w.shape)
      if (d < 1) throw StructuralError("weight '" + w.name + "' has an empty axis");
  }
  std::set<int> used;
  std::set<std::pair<std::string, Axis>> covered;
  for (const auto& u : usages) {
    const WeightDecl& w = weight(u.weight);
    if (w.kind == WeightKind::Vector && u.axis != Axis::Row)
      throw StructuralError("vector weight '" + w.name + "' used on its col axis");
    const GammaVar& g = gamma(u.gamma);
    if (g.width != w.axis_size(u.axis)) {
      throw StructuralError("width conflict at " + axis_label(w.name, u.axis) + ": gamma " + std::to_string(g.id) +
                            " has width " + std::to_string(g.width) + ", axis has " +
                            std::to_string(w.axis_size(u.axis)));
    }
    used.insert(u.gamma);
    covered.insert({u.weight, u.axis});
  }
  for (const auto& w : weights) {
    if (!covered.count({w.name, Axis::Row}))
      throw StructuralError("weight axis " + axis_label(w.name, Axis::Row) + " has no usage");
    if (w.kind == WeightKind::Matrix && !covered.count({w.name, Axis::Col}))
      throw StructuralError("weight axis " + axis_label(w.name, Axis::Col) + " has no usage");
  }
  for (const auto& g : gammas)
    if (!used.count(g.id)) throw StructuralError("gamma " + std::to_string(g.id) + " appears in no usage");
}

int GammaPartition::group_of(int id) const {
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (std::find(groups[i].begin(), groups[i].end(), id) != groups[i].end()) return static_cast<int>(i);
  return -1;
}

std::string GammaPartition::describe() const {
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out += "Γ_" + std::to_string(i + 1) + ": {";
    for (std::size_t k = 0; k < groups[i].size(); ++k) {
      if (k) out += ", ";
      out += "γ" + std::to_string(groups[i][k]);
    }
    out += "} width=" + std::to_string(widths[i]) + "\n";
  }
  return out;
}

GammaPartition compute_partition(const ArchGraph& g) {
  g.validate();
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < g.gammas.size(); ++i) index[g.gammas[i].id] = i;

  UnionFind uf(g.gammas.size());
  std::map<std::pair<std::string, Axis>, int> first_seen;
  for (const auto& u : g.usages) {
    auto [it, fresh] = first_seen.emplace(std::make_pair(u.weight, u.axis), u.gamma);
    if (fresh) continue;
    const GammaVar& a = g.gamma(it->second);
    const GammaVar& b = g.gamma(u.gamma);
    if (a.width != b.width) {
      throw StructuralError("width conflict merging gamma " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                            " at " + axis_label(u.weight, u.axis));
    }
    uf.unite(index[it->second], index[u.gamma]);
  }

  std::map<std::size_t, std::vector<int>> by_root;
  for (const auto& gv : g.gammas) by_root[uf.find(index[gv.id])].push_back(gv.id);

  std::vector<std::vector<int>> groups;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    const bool all_external =
        std::all_of(members.begin(), members.end(), [&](int id) { return g.gamma(id).external; });
    if (!all_external) groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

  GammaPartition p;
  for (auto& members : groups) {
    const std::size_t width = g.gamma(members.front()).width;
    bool data = true;
    for (int id : members) {
      if (g.gamma(id).width != width)
        throw StructuralError("group containing gamma " + std::to_string(id) + " has unequal widths");
      data = data && g.gamma(id).data;
    }
    p.widths.push_back(width);
    p.data.push_back(data);
    p.groups.push_back(std::move(members));
  }
  return p;
}

MlpSpec MlpSpec::uniform(std::size_t depth, std::size_t width, std::size_t input_dim, std::size_t output_dim,
                         bool bias, bool skip) {
  if (depth < 2) throw ParameterError("MLP depth must be >= 2, got " + std::to_string(depth));
  MlpSpec s;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.hidden.assign(depth - 1, width);
  s.bias = bias;
  s.skip = skip;
  return s;
}

std::string mlp_weight_name(std::size_t layer, std::size_t depth) {
  if (layer == 1) return "U";
  if (layer == depth) return "V";
  return "W" + std::to_string(layer - 1);
}

std::string mlp_bias_name(std::size_t layer, std::size_t depth) {
  if (layer == 1) return "BU";
  if (layer == depth) return "BV";
  return "B" + std::to_string(layer - 1);
}

ArchGraph build_mlp(const MlpSpec& spec, Parametrization p) {
  const std::size_t depth = spec.depth();
  if (spec.hidden.empty()) throw ParameterError("MLP depth must be >= 2");
  if (spec.input_dim < 1 || spec.output_dim < 1) throw ParameterError("MLP data dimensions must be >= 1");
  for (auto w : spec.hidden)
    if (w < 1) throw ParameterError("MLP hidden widths must be >= 1");
  if (spec.skip && depth < 4) throw ParameterError("skip connection needs depth >= 4");

  ArchGraph g;
  g.parametrization = p;
  int next = 1;
  int in_gamma = 0;
  if (spec.input_dim > 1) {
    in_gamma = next++;
    g.gammas.push_back({in_gamma, spec.input_dim, true, false});
  }
  std::vector<int> hid;
  for (auto w : spec.hidden) {
    hid.push_back(next++);
    g.gammas.push_back({hid.back(), w, false, false});
  }
  int out_gamma = 0;
  if (spec.output_dim > 1 || spec.bias) {
    out_gamma = next++;
    g.gammas.push_back({out_gamma, spec.output_dim, true, false});
  }

  for (std::size_t l = 1; l <= depth; ++l) {
    const std::string name = mlp_weight_name(l, depth);
    const int g_in = l == 1 ? in_gamma : hid[l - 2];
    const int g_out = l == depth ? out_gamma : hid[l - 1];
    const std::size_t fan_in = l == 1 ? spec.input_dim : spec.hidden[l - 2];
    const std::size_t fan_out = l == depth ? spec.output_dim : spec.hidden[l - 1];
    if (l == 1 && spec.input_dim == 1) {
      g.weights.push_back({name, WeightKind::Vector, {fan_out}});
      g.usages.push_back({name, Axis::Row, g_out});
    } else if (l == depth && spec.output_dim == 1) {
      g.weights.push_back({name, WeightKind::Vector, {fan_in}});
      g.usages.push_back({name, Axis::Row, g_in});
    } else {
      g.weights.push_back({name, WeightKind::Matrix, {fan_out, fan_in}});
      g.usages.push_back({name, Axis::Row, g_out});
      g.usages.push_back({name, Axis::Col, g_in});
    }
    if (spec.bias) {
      const std::string bname = mlp_bias_name(l, depth);
      g.weights.push_back({bname, WeightKind::Vector, {fan_out}});
      g.usages.push_back({bname, Axis::Row, g_out});
    }
  }
  if (spec.skip) {
    // Layer 2's pre-activation is added to layer 3's, so W1 and B1 rows also
    // carry layer 3's output index.
    g.usages.push_back({"W1", Axis::Row, hid[2]});
    g.usages.push_back({"W1", Axis::Col, hid[0]});
    if (spec.bias) g.usages.push_back({"B1", Axis::Row, hid[2]});
  }
  g.validate();
  return g;
}

ArchGraph build_mlp(std::size_t depth, const std::vector<std::size_t>& widths, bool with_bias, bool with_skip,
                    Parametrization p) {
  if (depth < 2) throw ParameterError("MLP depth must be >= 2, got " + std::to_string(depth));
  MlpSpec spec;
  if (widths.size() == 1) {
    spec.hidden.assign(depth - 1, widths.front());
  } else if (widths.size() == depth - 1) {
    spec.hidden = widths;
  } else {
    throw ParameterError("expected 1 or " + std::to_string(depth - 1) + " hidden widths, got " +
                         std::to_string(widths.size()));
  }
  spec.bias = with_bias;
  spec.skip = with_skip;
  return build_mlp(spec, p);
}

ArchGraph build_example3(std::size_t n) { return build_mlp(MlpSpec::uniform(4, n, 1, 1, true, true)); }

ArchGraph build_skip_block(std::size_t n) {
  if (n < 1) throw ParameterError("skip block width must be >= 1");
  ArchGraph g;
  for (int i = 1; i <= 6; ++i) g.gammas.push_back({i, n, false, i == 6});
  for (int i = 1; i <= 4; ++i) {
    g.weights.push_back({"W" + std::to_string(i), WeightKind::Matrix, {n, n}});
    g.weights.push_back({"B" + std::to_string(i), WeightKind::Vector, {n}});
  }
  g.usages = {
      {"B4", Axis::Row, 6}, {"W4", Axis::Row, 6}, {"W4", Axis::Col, 5}, {"B3", Axis::Row, 5},
      {"W3", Axis::Row, 5}, {"W3", Axis::Col, 4}, {"B2", Axis::Row, 3}, {"W2", Axis::Row, 3},
      {"W2", Axis::Col, 2}, {"B1", Axis::Row, 2}, {"W1", Axis::Row, 2}, {"W1", Axis::Col, 1},
      {"B1", Axis::Row, 5}, {"W1", Axis::Row, 5}, {"W1", Axis::Col, 1},
  };
  g.validate();
  return g;
}

ArchGraph build_attention_block(std::size_t n, std::size_t d_x) {
  if (n < 1 || d_x < 1) throw ParameterError("attention block needs n >= 1 and d_x >= 1");
  ArchGraph g;
  for (int i = 1; i <= 7; ++i) g.gammas.push_back({i, n, false, false});
  for (const char* name : {"W1", "WQ", "WK", "WV", "W2"}) g.weights.push_back({name, WeightKind::Matrix, {n, n}});
  g.weights.push_back({"B1", WeightKind::Vector, {n}});
  g.weights.push_back({"B2", WeightKind::Vector, {n}});
  g.usages = {
      {"B2", Axis::Row, 7}, {"W2", Axis::Row, 7}, {"W2", Axis::Col, 6}, {"WV", Axis::Row, 6},
      {"WV", Axis::Col, 4}, {"WK", Axis::Row, 5}, {"WK", Axis::Col, 3}, {"WQ", Axis::Row, 5},
      {"WQ", Axis::Col, 2}, {"B1", Axis::Row, 2}, {"W1", Axis::Row, 2}, {"W1", Axis::Col, 1},
      {"B1", Axis::Row, 3}, {"W1", Axis::Row, 3}, {"W1", Axis::Col, 1}, {"B1", Axis::Row, 4},
      {"W1", Axis::Row, 4}, {"W1", Axis::Col, 1},
  };
  g.validate();
  return g;
}

nlohmann::json to_json(const ArchGraph& g) {
  nlohmann::json j;
  j["parametrization"] = to_string(g.parametrization);
  j["weights"] = nlohmann::json::array();
  for (const auto& w : g.weights) {
    j["weights"].push_back(
        {{"name", w.name}, {"kind", w.kind == WeightKind::Matrix ? "matrix" : "vector"}, {"shape", w.shape}});
  }
  j["usages"] = nlohmann::json::array();
  for (const auto& u : g.usages) j["usages"].push_back({{"weight", u.weight}, {"axis", to_string(u.axis)}, {"gamma", u.gamma}});
  j["gammas"] = nlohmann::json::array();
  for (const auto& gv : g.gammas) {
    nlohmann::json e = {{"id", gv.id}, {"width", gv.width}};
    if (gv.data) e["data"] = true;
    if (gv.external) e["external"] = true;
    j["gammas"].push_back(e);
  }
  return j;
}

namespace {

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw FormatError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

ArchGraph arch_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw FormatError("architecture must be a JSON object");
    reject_unknown(j, {"parametrization", "weights", "usages", "gammas", "network"}, "architecture");
    ArchGraph g;
    if (j.contains("parametrization")) g.parametrization = parse_parametrization(j.at("parametrization").get<std::string>());
    for (const auto& w : j.at("weights")) {
      reject_unknown(w, {"name", "kind", "shape"}, "weight");
      WeightDecl d;
      d.name = w.at("name").get<std::string>();
      const std::string kind = w.at("kind").get<std::string>();
      if (kind == "matrix") {
        d.kind = WeightKind::Matrix;
      } else if (kind == "vector") {
        d.kind = WeightKind::Vector;
      } else {
        throw FormatError("weight '" + d.name + "' has unknown kind '" + kind + "'");
      }
      d.shape = w.at("shape").get<std::vector<std::size_t>>();
      g.weights.push_back(std::move(d));
    }
    for (const auto& u : j.at("usages")) {
      reject_unknown(u, {"weight", "axis", "gamma"}, "usage");
      AxisUsage a;
      a.weight = u.at("weight").get<std::string>();
      const std::string axis = u.at("axis").get<std::string>();
      if (axis == "row") {
        a.axis = Axis::Row;
      } else if (axis == "col") {
        a.axis = Axis::Col;
      } else {
        throw FormatError("usage of '" + a.weight + "' has unknown axis '" + axis + "'");
      }
      a.gamma = u.at("gamma").get<int>();
      g.usages.push_back(std::move(a));
    }
    if (j.contains("gammas")) {
      for (const auto& e : j.at("gammas")) {
        reject_unknown(e, {"id", "width", "data", "external"}, "gamma");
        GammaVar gv;
        gv.id = e.at("id").get<int>();
        gv.width = e.at("width").get<std::size_t>();
        gv.data = e.value("data", false);
        gv.external = e.value("external", false);
        g.gammas.push_back(gv);
      }
    } else {
      std::map<int, std::size_t> widths;
      for (const auto& u : g.usages) {
        const std::size_t w = g.weight(u.weight).axis_size(u.axis);
        auto [it, fresh] = widths.emplace(u.gamma, w);
        if (!fresh && it->second != w)
          throw StructuralError("width conflict: gamma " + std::to_string(u.gamma) + " indexes axes of width " +
                                std::to_string(it->second) + " and " + std::to_string(w) + " (at " +
                                axis_label(u.weight, u.axis) + ")");
      }
      for (auto [id, w] : widths) g.gammas.push_back({id, w, false, false});
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("architecture JSON: ") + e.what());
  }
}

}  // namespace mfgrow
