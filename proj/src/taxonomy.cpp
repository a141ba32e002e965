#include "hycomp/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hycomp/errors.hpp"
#include "json.hpp"

namespace hycomp {

namespace {

using json = nlohmann::ordered_json;

int find_name(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

std::vector<std::string> read_names(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw DataError(std::string("taxonomy: missing or invalid '") + key + "'");
  std::vector<std::string> out;
  for (const auto& v : j[key]) out.push_back(v.get<std::string>());
  return out;
}

// Maps each primitive to a parent index, building the ordered parent vocab
// in first-appearance order.
void read_parents(const json& j, const char* key,
                  const std::vector<std::string>& names,
                  std::vector<std::string>& vocab, std::vector<int>& parent) {
  if (!j.contains(key) || !j[key].is_object())
    throw DataError(std::string("taxonomy: missing or invalid '") + key + "'");
  const auto& m = j[key];
  parent.assign(names.size(), -1);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!m.contains(names[i]))
      throw DataError("taxonomy: missing parent for '" + names[i] + "' in " +
                      key);
    const std::string p = m[names[i]].get<std::string>();
    int idx = find_name(vocab, p);
    if (idx < 0) {
      vocab.push_back(p);
      idx = static_cast<int>(vocab.size()) - 1;
    }
    parent[i] = idx;
  }
  for (const auto& [k, v] : m.items()) {
    if (find_name(names, k) < 0)
      throw DataError(std::string("taxonomy: ") + key +
                      " names unknown primitive '" + k + "'");
  }
}

std::pair<int, int> read_pair(const json& v, const Taxonomy& t,
                              const char* where) {
  if (!v.is_array() || v.size() != 2)
    throw DataError(std::string("taxonomy: malformed pair in ") + where);
  const std::string s = v[0].get<std::string>();
  const std::string o = v[1].get<std::string>();
  const int si = t.state_index(s);
  if (si < 0)
    throw DataError(std::string("taxonomy: dangling composition in ") + where +
                    ": unknown state '" + s + "'");
  const int oi = t.object_index(o);
  if (oi < 0)
    throw DataError(std::string("taxonomy: dangling composition in ") + where +
                    ": unknown object '" + o + "'");
  return {si, oi};
}

}  // namespace

int Taxonomy::state_index(const std::string& name) const {
  return find_name(states, name);
}

int Taxonomy::object_index(const std::string& name) const {
  return find_name(objects, name);
}

std::vector<std::pair<int, int>> Taxonomy::split_pairs(
    const std::vector<int>& split) const {
  std::vector<std::pair<int, int>> out;
  out.reserve(split.size());
  for (int i : split) out.push_back(compositions[i]);
  return out;
}

std::vector<std::pair<int, int>> Taxonomy::open_world_candidates() const {
  std::set<std::pair<int, int>> masked(feasibility_mask.begin(),
                                       feasibility_mask.end());
  std::vector<std::pair<int, int>> out;
  for (int s = 0; s < static_cast<int>(states.size()); ++s)
    for (int o = 0; o < static_cast<int>(objects.size()); ++o)
      if (!masked.count({s, o})) out.push_back({s, o});
  return out;
}

std::vector<std::pair<int, int>> Taxonomy::closed_world_candidates() const {
  return compositions;
}

Taxonomy parse_taxonomy(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw DataError(std::string("taxonomy: parse error: ") + e.what());
  }

  Taxonomy t;
  t.states = read_names(j, "states");
  t.objects = read_names(j, "objects");
  read_parents(j, "state_parents", t.states, t.state_parent_vocab,
               t.state_parent);
  read_parents(j, "object_parents", t.objects, t.object_parent_vocab,
               t.object_parent);

  if (!j.contains("compositions") || !j["compositions"].is_array())
    throw DataError("taxonomy: missing or invalid 'compositions'");
  std::set<std::pair<int, int>> seen_comp;
  for (const auto& v : j["compositions"]) {
    const auto pr = read_pair(v, t, "compositions");
    if (!seen_comp.insert(pr).second)
      throw DataError("taxonomy: duplicate composition '" + t.states[pr.first] +
                      "," + t.objects[pr.second] + "'");
    t.compositions.push_back(pr);
  }

  auto comp_index = [&](const std::pair<int, int>& pr) {
    auto it = std::find(t.compositions.begin(), t.compositions.end(), pr);
    return it == t.compositions.end()
               ? -1
               : static_cast<int>(it - t.compositions.begin());
  };

  auto read_split = [&](const char* name) {
    std::vector<int> out;
    if (!j.contains("splits") || !j["splits"].contains(name)) return out;
    for (const auto& v : j["splits"][name]) {
      const auto pr = read_pair(v, t, name);
      const int ci = comp_index(pr);
      if (ci < 0)
        throw DataError(std::string("taxonomy: split '") + name +
                        "' references composition '" + t.states[pr.first] +
                        "," + t.objects[pr.second] +
                        "' absent from 'compositions'");
      out.push_back(ci);
    }
    return out;
  };
  t.splits.train_seen = read_split("train_seen");
  t.splits.val_seen = read_split("val_seen");
  t.splits.val_unseen = read_split("val_unseen");
  t.splits.test_seen = read_split("test_seen");
  t.splits.test_unseen = read_split("test_unseen");

  auto check_disjoint = [&](const std::vector<int>& a,
                            const std::vector<int>& b, const char* phase) {
    std::set<int> sa(a.begin(), a.end());
    for (int i : b)
      if (sa.count(i))
        throw DataError(std::string("taxonomy: seen/unseen overlap in ") +
                        phase + " split: '" +
                        t.states[t.compositions[i].first] + "," +
                        t.objects[t.compositions[i].second] + "'");
  };
  check_disjoint(t.splits.val_seen, t.splits.val_unseen, "val");
  check_disjoint(t.splits.test_seen, t.splits.test_unseen, "test");
  check_disjoint(t.splits.train_seen, t.splits.val_unseen, "train/val");
  check_disjoint(t.splits.train_seen, t.splits.test_unseen, "train/test");

  if (j.contains("feasibility_mask")) {
    for (const auto& v : j["feasibility_mask"])
      t.feasibility_mask.push_back(read_pair(v, t, "feasibility_mask"));
  }
  return t;
}

Taxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("taxonomy: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_taxonomy(ss.str());
}

std::string taxonomy_to_json(const Taxonomy& t) {
  json j;
  j["states"] = t.states;
  j["objects"] = t.objects;
  json sp = json::object();
  for (std::size_t i = 0; i < t.states.size(); ++i)
    sp[t.states[i]] = t.state_parent_vocab[t.state_parent[i]];
  j["state_parents"] = sp;
  json op = json::object();
  for (std::size_t i = 0; i < t.objects.size(); ++i)
    op[t.objects[i]] = t.object_parent_vocab[t.object_parent[i]];
  j["object_parents"] = op;
  json comps = json::array();
  for (const auto& [s, o] : t.compositions)
    comps.push_back({t.states[s], t.objects[o]});
  j["compositions"] = comps;
  json splits = json::object();
  auto put_split = [&](const char* name, const std::vector<int>& split) {
    json arr = json::array();
    for (int i : split)
      arr.push_back(
          {t.states[t.compositions[i].first], t.objects[t.compositions[i].second]});
    splits[name] = arr;
  };
  put_split("train_seen", t.splits.train_seen);
  put_split("val_seen", t.splits.val_seen);
  put_split("val_unseen", t.splits.val_unseen);
  put_split("test_seen", t.splits.test_seen);
  put_split("test_unseen", t.splits.test_unseen);
  j["splits"] = splits;
  if (!t.feasibility_mask.empty()) {
    json mask = json::array();
    for (const auto& [s, o] : t.feasibility_mask)
      mask.push_back({t.states[s], t.objects[o]});
    j["feasibility_mask"] = mask;
  }
  return j.dump(2) + "\n";
}

void save_taxonomy(const std::string& path, const Taxonomy& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("taxonomy: cannot write '" + path + "'");
  out << taxonomy_to_json(t);
}

std::vector<int> hard_negatives(
    int c, const std::vector<std::pair<int, int>>& candidates) {
  const auto [s, o] = candidates[c];
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(candidates.size()); ++j) {
    if (j == c) continue;
    if (candidates[j].first == s || candidates[j].second == o) out.push_back(j);
  }
  return out;
}

HardNegativeIndex build_hard_negative_index(
    const std::vector<std::pair<int, int>>& candidates) {
  HardNegativeIndex idx;
  idx.per_composition.resize(candidates.size());
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c)
    idx.per_composition[c] = hard_negatives(c, candidates);
  return idx;
}

std::vector<EntailmentEdge> text_hierarchy_edges(const Taxonomy& t) {
  using K = EntailmentEdge::Kind;
  using Ch = EntailmentEdge::Channel;
  std::vector<EntailmentEdge> edges;
  for (int c = 0; c < static_cast<int>(t.compositions.size()); ++c) {
    edges.push_back({K::kStateToComp, Ch::kTextualConceptual,
                     t.compositions[c].first, c});
    edges.push_back({K::kObjectToComp, Ch::kTextualConceptual,
                     t.compositions[c].second, c});
  }
  for (int s = 0; s < static_cast<int>(t.states.size()); ++s)
    edges.push_back({K::kSParentToState, Ch::kTextualSemantic,
                     t.state_parent[s], s});
  for (int o = 0; o < static_cast<int>(t.objects.size()); ++o)
    edges.push_back({K::kOParentToObject, Ch::kTextualSemantic,
                     t.object_parent[o], o});
  return edges;
}

}  // namespace hycomp
