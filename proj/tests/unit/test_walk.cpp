#include <doctest.h>

#include <filesystem>
#include "fixtures.hpp"
#include "newsvec/walk.hpp"

using namespace newsvec;

using fixture::ten_node_graph;

TEST_CASE("transition distribution: hand example and bias cancellation") {
  AttributedGraph g;
  const auto t = g.add_node("t", NodeKind::Element);
  const auto v = g.add_node("v", NodeKind::News);
  const auto x = g.add_node("x", NodeKind::Element);
  g.add_edge(v, t, 1.0);
  g.add_edge(v, x, 1.0);
  g.finalize();
  WalkConfig cfg;
  cfg.p = 4.0;
  cfg.q = 1.0;
  const auto probs = transition_distribution(t, v, g, cfg);
  // neighbours of v sorted by id: t (0), x (2)
  CHECK(probs[0] == doctest::Approx(0.2));
  CHECK(probs[1] == doctest::Approx(0.8));

  std::vector<std::vector<double>> w;
  const auto big = ten_node_graph(&w);
  WalkConfig plain;
  for (NodeId cur = 0; cur < 10; ++cur)
    for (const auto& prev : big.neighbors(cur)) {
      const auto d = transition_distribution(prev.node, cur, big, plain);
      double z = 0.0;
      for (const auto& n : big.neighbors(cur)) z += n.weight;
      for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(big.neighbors(cur)[i].weight / z));
    }

  // Return mass is w / p.
  WalkConfig biased;
  biased.p = 3.0;
  biased.q = 0.5;
  for (NodeId cur = 0; cur < 10; ++cur)
    for (const auto& prev : big.neighbors(cur)) {
      const auto d = transition_distribution(prev.node, cur, big, biased);
      const auto truth = oracle::transition(w, prev.node, cur, biased.p, biased.q);
      for (std::size_t i = 0; i < d.size(); ++i)
        CHECK(d[i] == doctest::Approx(truth[big.neighbors(cur)[i].node]).epsilon(1e-14));
    }
}

TEST_CASE("transition distribution errors") {
  AttributedGraph g;
  const auto a = g.add_node("a", NodeKind::News);
  const auto b = g.add_node("elem:b", NodeKind::Element);
  const auto c = g.add_node("elem:c", NodeKind::Element);
  g.add_edge(a, b, 1.0);
  g.finalize();
  WalkConfig cfg;
  CHECK_THROWS_AS(transition_distribution(a, c, g, cfg), Error);
  CHECK_THROWS_AS(transition_distribution(c, a, g, cfg), Error);
  cfg.p = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("single edge forces the path") {
  AttributedGraph g;
  const auto k = g.add_node("k", NodeKind::News);
  const auto e = g.add_node("elem:e", NodeKind::Element);
  g.add_edge(k, e, 0.4);
  g.finalize();
  WalkConfig cfg;
  cfg.length = 4;
  cfg.walks_per_node = 1;
  const auto walks = sample_walks(g, cfg);
  REQUIRE(walks.size() == 2);
  CHECK(walks[0] == WalkSequence{k, e, k, e});
  CHECK(walks[1] == WalkSequence{e, k, e, k});
}

TEST_CASE("walks are reproducible, thread independent and alternate kinds") {
  const auto g = ten_node_graph();
  WalkConfig cfg;
  cfg.length = 30;
  cfg.walks_per_node = 3;
  cfg.p = 2.0;
  cfg.q = 0.5;
  cfg.seed = 99;
  const auto a = sample_walks(g, cfg);
  const auto b = sample_walks(g, cfg);
  CHECK(a == b);
  cfg.threads = 4;
  CHECK(sample_walks(g, cfg) == a);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].size() == 30);
    CHECK(a[i][0] == static_cast<NodeId>(i % 10));
    for (std::size_t s = 1; s < a[i].size(); ++s) {
      CHECK(g.adjacent(a[i][s - 1], a[i][s]));
      CHECK(g.kind(a[i][s - 1]) != g.kind(a[i][s]));
    }
  }
  cfg.seed = 100;
  CHECK(sample_walks(g, cfg) != a);
}

TEST_CASE("empirical transitions pass a chi-square test") {
  std::vector<std::vector<double>> w;
  const auto g = ten_node_graph(&w);
  for (auto [p, q] : {std::pair{1.0, 1.0}, {4.0, 1.0}, {1.0, 4.0}})
    for (bool alias : {false, true}) {
      WalkConfig cfg;
      cfg.p = p;
      cfg.q = q;
      cfg.length = 100;
      cfg.walks_per_node = 110;
      cfg.use_alias = alias;
      cfg.seed = 2024;
      const auto chi = fixture::transition_chi_square(w, sample_walks(g, cfg), p, q);
      CAPTURE(p);
      CAPTURE(q);
      CAPTURE(alias);
      CHECK(chi.steps >= 100000);
      CHECK(chi.impossible == 0);
      CHECK(chi.p_value > 0.001);
    }
}

TEST_CASE("first step is weight proportional") {
  const auto g = ten_node_graph();
  const auto d = first_step_distribution(0, g);
  CHECK(d.size() == 3);
  CHECK(d[0] == doctest::Approx(1.0 / 3.5));
  CHECK(d[1] == doctest::Approx(2.0 / 3.5));
  CHECK(d[2] == doctest::Approx(0.5 / 3.5));
}

TEST_CASE("alias table reproduces its weights") {
  const AliasTable t({1.0, 0.0, 3.0, 6.0});
  Rng rng(5);
  std::vector<double> counts(4, 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[t.sample(rng)];
  CHECK(counts[1] == 0.0);
  CHECK(counts[0] / n == doctest::Approx(0.1).epsilon(0.05));
  CHECK(counts[2] / n == doctest::Approx(0.3).epsilon(0.02));
  CHECK(counts[3] / n == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("walk dump round trip") {
  const auto g = ten_node_graph();
  WalkConfig cfg;
  cfg.length = 7;
  cfg.walks_per_node = 2;
  const auto walks = sample_walks(g, cfg);
  const auto path = std::filesystem::temp_directory_path() / "newsvec_walks.txt";
  write_walks(path, walks, g);
  CHECK(read_walks(path, g) == walks);
  std::filesystem::remove(path);
}
