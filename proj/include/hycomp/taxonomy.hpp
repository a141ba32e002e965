#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hycomp {

// Three-layer taxonomy: parent categories over state/object primitives, and
// compositions (state, object) under both of their primitives.
struct Taxonomy {
  std::vector<std::string> states;
  std::vector<std::string> objects;

  // Ordered, deduplicated parent vocabularies and per-primitive parent index.
  std::vector<std::string> state_parent_vocab;
  std::vector<std::string> object_parent_vocab;
  std::vector<int> state_parent;
  std::vector<int> object_parent;

  std::vector<std::pair<int, int>> compositions;  // (state, object)

  struct Splits {
    std::vector<int> train_seen, val_seen, val_unseen, test_seen, test_unseen;
  };
  Splits splits;  // indices into compositions

  std::vector<std::pair<int, int>> feasibility_mask;  // infeasible pairs

  int state_index(const std::string& name) const;
  int object_index(const std::string& name) const;

  std::vector<std::pair<int, int>> split_pairs(const std::vector<int>& split) const;

  // Full Cartesian product minus the feasibility mask.
  std::vector<std::pair<int, int>> open_world_candidates() const;
  // The curated composition list.
  std::vector<std::pair<int, int>> closed_world_candidates() const;
};

Taxonomy load_taxonomy(const std::string& path);
Taxonomy parse_taxonomy(const std::string& json_text);
std::string taxonomy_to_json(const Taxonomy& t);
void save_taxonomy(const std::string& path, const Taxonomy& t);

// H_i = { j in candidates : s_j = s_i or o_j = o_i } \ { i }, ascending.
std::vector<int> hard_negatives(int c,
                                const std::vector<std::pair<int, int>>& candidates);

struct HardNegativeIndex {
  std::vector<std::vector<int>> per_composition;
};
HardNegativeIndex build_hard_negative_index(
    const std::vector<std::pair<int, int>>& candidates);

// Parent-child edges used by the entailment loss and hierarchy reports.
struct EntailmentEdge {
  enum class Kind {
    kStateToComp,     // S[parent] -> C[child]
    kObjectToComp,    // O[parent] -> C[child]
    kSParentToState,  // Sp[parent] -> S[child]
    kOParentToObject  // Op[parent] -> O[child]
  };
  enum class Channel { kVisualConceptual, kTextualConceptual, kTextualSemantic };
  Kind kind;
  Channel channel;
  int parent;  // index into the table named by kind
  int child;
};

// Conceptual edges for every composition plus semantic edges for every
// primitive, all on the textual channel.
std::vector<EntailmentEdge> text_hierarchy_edges(const Taxonomy& t);

}  // namespace hycomp
