#include <doctest.h>

#include <sstream>

#include "pere/data.hpp"
#include "pere/errors.hpp"

namespace {

pere::Catalog read(const std::string& text) {
  std::istringstream in(text);
  return pere::read_catalog(in);
}

std::string write(const pere::Catalog& c) {
  std::ostringstream out;
  pere::write_catalog(out, c);
  return out.str();
}

// Mean silhouette of a Lloyd 2-means fit seeded with two far-apart points.
double two_means_silhouette(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.cols();
  std::vector<int> label(static_cast<std::size_t>(n), 0);
  Eigen::MatrixXd c(x.rows(), 2);
  c.col(0) = x.col(0);
  Eigen::Index far = 0;
  (x.colwise() - x.col(0)).colwise().squaredNorm().maxCoeff(&far);
  c.col(1) = x.col(far);
  for (int iter = 0; iter < 50; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i)
      label[static_cast<std::size_t>(i)] = (x.col(i) - c.col(0)).squaredNorm() <= (x.col(i) - c.col(1)).squaredNorm() ? 0 : 1;
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
      int count = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (label[static_cast<std::size_t>(i)] == k) sum += x.col(i), ++count;
      if (count) c.col(k) = sum / count;
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d[2] = {0.0, 0.0};
    int cnt[2] = {0, 0};
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const int l = label[static_cast<std::size_t>(j)];
      d[l] += (x.col(i) - x.col(j)).norm();
      ++cnt[l];
    }
    const int own = label[static_cast<std::size_t>(i)];
    const double a = cnt[own] ? d[own] / cnt[own] : 0.0;
    const double b = cnt[1 - own] ? d[1 - own] / cnt[1 - own] : 0.0;
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("catalog CSV: weights normalized, order kept") {
  const auto c = read("id,weight,e0,e1\na,10,0.1,0.2\nb,5,0.3,0.4\n");
  REQUIRE(c.size() == 2);
  CHECK(c.id(0) == "a");
  CHECK(c.weight(0) == 1.0);
  CHECK(c.weight(1) == 0.5);
  CHECK(c.embedding(1)[1] == 0.4);
  CHECK_FALSE(c.normalization().rescaled);
}

TEST_CASE("catalog CSV: rows re-sorted by popularity, missing weights default to one") {
  const auto c = read("id,weight,e0\nlow,1,0.1\nhigh,4,0.9\n");
  CHECK(c.id(0) == "high");
  CHECK(c.weight(1) == 0.25);
  const auto u = read("id,e0\nx,0.5\ny,0.25\n");
  CHECK(u.normalization().weights_defaulted);
  CHECK(u.weight(0) == 1.0);
  CHECK(u.weight(1) == 1.0);
}

TEST_CASE("catalog CSV: out-of-range coordinates are min-max rescaled") {
  const auto c = read("id,weight,e0,e1\na,1,1.2,0.5\nb,1,0.2,0.0\nc,1,0.7,1.0\n");
  CHECK(c.normalization().rescaled);
  CHECK(c.embedding(0)[0] == doctest::Approx(1.0));
  CHECK(c.embedding(1)[0] == doctest::Approx(0.0));
  CHECK(c.embedding(2)[0] == doctest::Approx(0.5));
  CHECK(c.embeddings().minCoeff() >= 0.0);
  CHECK(c.embeddings().maxCoeff() <= 1.0);
}

TEST_CASE("catalog CSV: round trip is bit exact and idempotent") {
  const auto c = pere::synth_catalog(50, 3, 4, 17);
  const std::string once = write(c);
  const auto back = read(once);
  CHECK(back.embeddings() == c.embeddings());
  CHECK(back.weights() == c.weights());
  CHECK(write(back) == once);
  const auto crlf = read("id,weight,e0\r\na,1,0.5\r\n\r\n");
  CHECK(crlf.size() == 1);
}

TEST_CASE("catalog CSV: errors") {
  CHECK_THROWS_AS(read(""), pere::SchemaError);
  CHECK_THROWS_AS(read("id,weight,e0\n"), pere::SchemaError);
  CHECK_THROWS_AS(read("name,weight,e0\na,1,0.5\n"), pere::SchemaError);
  CHECK_THROWS_AS(read("id,weight,e0,e1\na,1,0.5\n"), pere::SchemaError);
  CHECK_THROWS_AS(read("id,weight,e0\na,1,0.5\nb,1,0.5\na,1,0.2\n"), pere::SchemaError);
  try {
    read("id,weight,e0\na,1,0.5\nb,1,zz\n");
    FAIL("expected ParseError");
  } catch (const pere::ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(pere::load_catalog("/nonexistent/catalog.csv"), pere::Error);
}

TEST_CASE("synth_catalog: determinism, bounds and separation") {
  const auto a = pere::synth_catalog(120, 5, 3, 9);
  const auto b = pere::synth_catalog(120, 5, 3, 9);
  CHECK(a.embeddings() == b.embeddings());
  CHECK(a.weights() == b.weights());
  CHECK(a.embeddings().minCoeff() >= 0.0);
  CHECK(a.embeddings().maxCoeff() <= 1.0);
  CHECK(a.weight(0) == 1.0);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.weight(i) <= a.weight(i - 1));

  const auto one = pere::synth_catalog(1, 2, 1, 3);
  CHECK(one.size() == 1);
  CHECK(one.weight(0) == 1.0);
  CHECK_THROWS_AS(pere::synth_catalog(1, 2, 2, 3), pere::InvalidInput);

  const auto two = pere::synth_catalog(200, 4, 2, 5, 0.03);
  CHECK(two_means_silhouette(two.embeddings()) > 0.5);
}

TEST_CASE("config JSON") {
  const auto c = pere::parse_config(R"({"K": 20, "m": 5, "T": 3, "P": 100, "tau": 0.1, "squash": "tanh",
                                        "strategy": "kmedoids", "tolerant_mode": true, "seed": 9})");
  CHECK(c.burn_in_size == 20);
  CHECK(c.batch_size == 5);
  CHECK(c.rounds == 3);
  CHECK(c.popular_count == 100);
  CHECK(c.tau == 0.1);
  CHECK(c.squash == pere::Squash::kTanh);
  CHECK(c.strategy == pere::BurnInStrategy::kKMedoids);
  CHECK(c.tolerant_mode);
  CHECK(c.seed == 9);
  const auto back = pere::parse_config(pere::config_to_json(c));
  CHECK(pere::config_to_json(back) == pere::config_to_json(c));

  CHECK_THROWS_AS(pere::parse_config(R"({"K": 1, "bogus": 2})"), pere::SchemaError);
  CHECK_THROWS_AS(pere::parse_config(R"({"K": "ten"})"), pere::SchemaError);
  CHECK_THROWS_AS(pere::parse_config(R"({"K": -1})"), pere::SchemaError);
  CHECK_THROWS_AS(pere::parse_config(R"({"strategy": "best"})"), pere::SchemaError);
  CHECK_THROWS_AS(pere::parse_config("[1,2"), pere::ParseError);

  pere::Config bad;
  bad.burn_in_size = 60;
  bad.popular_count = 50;
  CHECK_THROWS_AS(bad.validate(100), pere::InvalidInput);
  bad = {};
  CHECK_THROWS_AS(bad.validate(10), pere::InvalidInput);
}
