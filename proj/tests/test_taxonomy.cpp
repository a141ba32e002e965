#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "hycomp/errors.hpp"
#include "hycomp/rng.hpp"
#include "hycomp/synth.hpp"
#include "hycomp/taxonomy.hpp"

using namespace hycomp;

namespace {

const char* kMinimal = R"({
  "states": ["wet", "dry"],
  "objects": ["dog", "car"],
  "state_parents": {"wet": "condition", "dry": "condition"},
  "object_parents": {"dog": "animal", "car": "vehicle"},
  "compositions": [["wet", "dog"], ["dry", "dog"], ["wet", "car"]],
  "splits": {"train_seen": [["wet", "dog"], ["dry", "dog"]],
             "test_seen": [["wet", "dog"]],
             "test_unseen": [["wet", "car"]]}
})";

}  // namespace

TEST_CASE("minimal taxonomy loads with validated fields") {
  const Taxonomy t = parse_taxonomy(kMinimal);
  CHECK(t.states.size() == 2);
  CHECK(t.objects.size() == 2);
  CHECK(t.compositions.size() == 3);
  CHECK(t.state_parent_vocab == std::vector<std::string>{"condition"});
  CHECK(t.object_parent_vocab == std::vector<std::string>{"animal", "vehicle"});
  CHECK(t.splits.train_seen.size() == 2);
  CHECK(t.splits.test_unseen.size() == 1);
  CHECK(t.state_index("dry") == 1);
  CHECK(t.object_index("missing") == -1);
}

TEST_CASE("dangling composition names the offender") {
  std::string text = kMinimal;
  text.replace(text.find("[\"wet\", \"car\"]"), 14, "[\"wet\", \"cat\"]");
  CHECK_THROWS_WITH_AS(parse_taxonomy(text),
                       doctest::Contains("unknown object 'cat'"), DataError);
}

TEST_CASE("missing parent names the primitive") {
  std::string text = kMinimal;
  text.replace(text.find("\"dry\": \"condition\""), 18, "\"drier\": \"cond\"");
  CHECK_THROWS_WITH_AS(parse_taxonomy(text),
                       doctest::Contains("missing parent for 'dry'"),
                       DataError);
}

TEST_CASE("overlapping seen/unseen split rejected") {
  std::string text = kMinimal;
  text.replace(text.find("\"test_unseen\": [[\"wet\", \"car\"]]"), 31,
               "\"test_unseen\": [[\"wet\", \"dog\"]]");
  CHECK_THROWS_WITH_AS(parse_taxonomy(text), doctest::Contains("overlap"),
                       DataError);
}

TEST_CASE("parse error is reported as a data error") {
  CHECK_THROWS_AS(parse_taxonomy("{not json"), DataError);
}

TEST_CASE("zappos-shaped synthetic taxonomy and open-world candidates") {
  // 16 states x 12 objects, 83 seen + 18 unseen listed compositions.
  Taxonomy t;
  for (int s = 0; s < 16; ++s) {
    t.states.push_back("s" + std::to_string(s));
    t.state_parent.push_back(s % 4);
  }
  t.state_parent_vocab = {"sp0", "sp1", "sp2", "sp3"};
  for (int o = 0; o < 12; ++o) {
    t.objects.push_back("o" + std::to_string(o));
    t.object_parent.push_back(o % 3);
  }
  t.object_parent_vocab = {"op0", "op1", "op2"};
  Rng rng(3);
  std::vector<std::pair<int, int>> all;
  for (int s = 0; s < 16; ++s)
    for (int o = 0; o < 12; ++o) all.push_back({s, o});
  rng.shuffle(all);
  for (int i = 0; i < 101; ++i) t.compositions.push_back(all[i]);
  for (int i = 0; i < 83; ++i) t.splits.train_seen.push_back(i);
  for (int i = 83; i < 101; ++i) t.splits.test_unseen.push_back(i);

  const std::string text = taxonomy_to_json(t);
  const Taxonomy back = parse_taxonomy(text);
  CHECK(back.compositions.size() == 101);
  CHECK(back.splits.train_seen.size() == 83);
  CHECK(back.splits.test_unseen.size() == 18);
  CHECK(back.open_world_candidates().size() == 16 * 12);
}

TEST_CASE("round trip through JSON is byte stable") {
  const Taxonomy t = parse_taxonomy(kMinimal);
  const std::string once = taxonomy_to_json(t);
  const std::string twice = taxonomy_to_json(parse_taxonomy(once));
  CHECK(once == twice);
}

TEST_CASE("feasibility mask shrinks the open-world candidate set") {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), R"(,"feasibility_mask": [["dry", "car"]])");
  const Taxonomy t = parse_taxonomy(text);
  CHECK(t.open_world_candidates().size() == 3);
}

TEST_CASE("hard negatives on the spec examples") {
  // C = {(s1,o1), (s1,o2), (s2,o2)}
  const std::vector<std::pair<int, int>> cands = {{1, 1}, {1, 2}, {2, 2}};
  CHECK(hard_negatives(0, cands) == std::vector<int>{1});
  CHECK(hard_negatives(1, cands) == std::vector<int>{0, 2});
}

TEST_CASE("hard negatives match brute force on random taxonomies") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int ns = 2 + static_cast<int>(rng.below(49));
    const int no = 2 + static_cast<int>(rng.below(49));
    std::set<std::pair<int, int>> chosen;
    const int n = 3 + static_cast<int>(rng.below(60));
    while (static_cast<int>(chosen.size()) < n)
      chosen.insert({static_cast<int>(rng.below(ns)),
                     static_cast<int>(rng.below(no))});
    const std::vector<std::pair<int, int>> cands(chosen.begin(), chosen.end());
    const HardNegativeIndex idx = build_hard_negative_index(cands);
    for (int c = 0; c < n; ++c) {
      std::vector<int> brute;
      for (int j = 0; j < n; ++j) {
        if (j == c) continue;
        if (cands[j].first == cands[c].first ||
            cands[j].second == cands[c].second)
          brute.push_back(j);
      }
      CHECK(idx.per_composition[c] == brute);
      for (int j : idx.per_composition[c]) CHECK(j != c);
    }
  }
}

TEST_CASE("text hierarchy edges cover conceptual and semantic links") {
  const Taxonomy t = parse_taxonomy(kMinimal);
  const auto edges = text_hierarchy_edges(t);
  CHECK(edges.size() == 2 * t.compositions.size() + t.states.size() +
                            t.objects.size());
  int conceptual = 0, semantic = 0;
  for (const auto& e : edges) {
    if (e.channel == EntailmentEdge::Channel::kTextualConceptual) ++conceptual;
    if (e.channel == EntailmentEdge::Channel::kTextualSemantic) ++semantic;
  }
  CHECK(conceptual == 6);
  CHECK(semantic == 4);
}

TEST_CASE("balanced synthetic taxonomy has the expected shape") {
  Rng rng(5);
  SynthTaxonomySpec spec;
  spec.seen_fraction = 0.6;
  const Taxonomy t = make_balanced_taxonomy(spec, rng);
  CHECK(t.states.size() == 9);
  CHECK(t.objects.size() == 9);
  CHECK(t.compositions.size() == 81);
  CHECK(t.state_parent_vocab.size() == 3);
  CHECK(t.splits.train_seen.size() + t.splits.test_unseen.size() == 81);
  CHECK(t.splits.train_seen.size() == 49);  // round(0.6 * 81)
  // Loadable through the public schema.
  const Taxonomy back = parse_taxonomy(taxonomy_to_json(t));
  CHECK(back.compositions == t.compositions);
}
