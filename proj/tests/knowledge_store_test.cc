#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "kgnn/knowledge_store.h"

namespace kgnn {
namespace {

KnowledgeStore FigureStore() {
  return KnowledgeStore({{"WildestDreams", "Wildest Dreams", {}},
                         {"MaxMartin", "Max Martin", {}},
                         {"TaylorSwift", "Taylor Swift", {"Taylor"}}},
                        {{"WildestDreams", "lyrics_by", "MaxMartin"}},
                        RelationVocabulary::Default());
}

class TempFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("kgnn_ks_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string Write(const std::string& name, const std::string& body) {
    const auto path = (dir_ / name).string();
    std::ofstream(path) << body;
    return path;
  }
  std::string Entities() {
    return Write("entities.jsonl",
                 "{\"id\":\"e1\",\"name\":\"Wildest Dreams\"}\n"
                 "{\"id\":\"e2\",\"name\":\"Max Martin\",\"aliases\":[\"Martin\"]}\n"
                 "\n"
                 "{\"id\":\"e3\",\"name\":\"Taylor Swift\"}\n");
  }
  std::filesystem::path dir_;
};

TEST(RelationVocabulary, CorefIsReservedFirst) {
  const RelationVocabulary v = RelationVocabulary::Default();
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.Name(RelationVocabulary::kCoref), "equal_to");
  EXPECT_EQ(v.Find("lyrics_by"), std::optional<std::size_t>(4));
  EXPECT_FALSE(v.Find("married_to").has_value());
  EXPECT_THROW(RelationVocabulary({"a", "a"}), std::invalid_argument);
}

TEST_F(TempFiles, EmptyTriplesFileIsValid) {
  const KnowledgeStore s = KnowledgeStore::Load(Entities(), Write("t.tsv", ""));
  EXPECT_EQ(s.triples().size(), 0u);
  EXPECT_EQ(s.entities().size(), 3u);
}

TEST_F(TempFiles, DuplicateTripleStoredOnce) {
  const KnowledgeStore s = KnowledgeStore::Load(
      Entities(), Write("t.tsv", "e1\tlyrics_by\te2\n# comment\ne1\tlyrics_by\te2\n"));
  EXPECT_EQ(s.triples().size(), 1u);
  EXPECT_EQ(s.QueryRelations("e1", "e2").size(), 1u);
}

TEST_F(TempFiles, FixtureRoundTripReturnsBothFacts) {
  const KnowledgeStore s = KnowledgeStore::Load(
      Entities(), Write("t.tsv", "e1\tlyrics_by\te2\ne1\trecord_label\te2\n"));
  const auto hits = s.QueryRelations("e1", "e2");
  ASSERT_EQ(hits.size(), 2u);
  std::set<std::string> names;
  for (const auto& h : hits) {
    EXPECT_EQ(h.direction, Direction::kForward);
    names.insert(s.relations().Name(h.relation));
  }
  EXPECT_EQ(names, (std::set<std::string>{"lyrics_by", "record_label"}));
}

TEST_F(TempFiles, UnknownEntityReportsLine) {
  try {
    KnowledgeStore::Load(Entities(), Write("t.tsv", "# header\ne1\tlyrics_by\tnobody\n"));
    FAIL() << "expected rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("t.tsv:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("nobody"), std::string::npos) << e.what();
  }
}

TEST_F(TempFiles, UnknownRelationRejected) {
  EXPECT_THROW(KnowledgeStore::Load(Entities(), Write("t.tsv", "e1\tmarried_to\te2\n")),
               std::runtime_error);
  // The co-reference type is not a storable fact.
  EXPECT_THROW(KnowledgeStore::Load(Entities(), Write("t.tsv", "e1\tequal_to\te2\n")),
               std::runtime_error);
}

TEST_F(TempFiles, MalformedLinesRejected) {
  EXPECT_THROW(KnowledgeStore::Load(Entities(), Write("t.tsv", "e1 lyrics_by e2\n")),
               std::runtime_error);
  EXPECT_THROW(KnowledgeStore::Load(Write("e.jsonl", "{\"id\":\"x\"}\n"), Write("t.tsv", "")),
               std::runtime_error);
  EXPECT_THROW(KnowledgeStore::Load((dir_ / "missing").string(), Write("t.tsv", "")),
               std::runtime_error);
}

TEST(LinkMentions, GreedyLongestMatch) {
  const KnowledgeStore s({{"e1", "Wildest Dreams", {}}, {"e2", "Taylor", {}}}, {},
                         RelationVocabulary::Default());
  TokenizedText t;
  t.tokens = {"Wildest", "Dreams", "by", "Taylor"};
  const auto m = s.LinkMentions(t, 0);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (Mention{0, 0, 1, "e1"}));
  EXPECT_EQ(m[1], (Mention{0, 3, 3, "e2"}));
}

TEST(LinkMentions, LongerAliasBeatsContainedOne) {
  const KnowledgeStore s(
      {{"e1", "Wildest Dreams", {}}, {"e2", "Taylor", {}}, {"e3", "Dreams", {}}}, {},
      RelationVocabulary::Default());
  TokenizedText t;
  t.tokens = {"Wildest", "Dreams", "by", "Taylor"};
  const auto m = s.LinkMentions(t, 4);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (Mention{4, 0, 1, "e1"}));
}

TEST(LinkMentions, CaseInsensitiveAndEmpty) {
  const KnowledgeStore s = FigureStore();
  const auto m = s.LinkMentions(Tokenize("wildest DREAMS, said taylor."), 1);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[1].entity_id, "TaylorSwift");
  EXPECT_TRUE(s.LinkMentions(Tokenize("Nothing to see here."), 0).empty());
}

TEST(QueryRelations, FigureFactBothWays) {
  const KnowledgeStore s = FigureStore();
  const auto fwd = s.QueryRelations("WildestDreams", "MaxMartin");
  ASSERT_EQ(fwd.size(), 1u);
  EXPECT_EQ(s.relations().Name(fwd[0].relation), "lyrics_by");
  EXPECT_EQ(fwd[0].direction, Direction::kForward);
  const auto back = s.QueryRelations("MaxMartin", "WildestDreams");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], (RelationHit{fwd[0].relation, Direction::kBackward}));
  EXPECT_TRUE(s.QueryRelations("WildestDreams", "TaylorSwift").empty());
  EXPECT_THROW(s.QueryRelations("WildestDreams", "Nobody"), std::invalid_argument);
}

}  // namespace
}  // namespace kgnn
