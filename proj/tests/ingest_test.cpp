#include <doctest.h>

#include <fstream>
#include <sstream>

#include "icsad/error.hpp"
#include "icsad/ingest.hpp"
#include "icsad/random.hpp"
#include "oracles/streaming.hpp"

using namespace icsad;
using namespace icsad::ingest;

namespace {

const std::string kGasCsv = std::string(ICSAD_FIXTURE_DIR) + "/gas_pipeline_20.csv";
const std::string kArff = std::string(ICSAD_FIXTURE_DIR) + "/sample.arff";

RecordTable table_from(const Eigen::MatrixXd& rows, std::optional<std::vector<int>> labels = {}) {
  RecordTable t;
  for (Eigen::Index k = 0; k < rows.cols(); ++k) t.feature_names.push_back("c" + std::to_string(k));
  t.rows = rows;
  t.labels = std::move(labels);
  return t;
}

}  // namespace

TEST_CASE("gas pipeline csv drops time and splits the binary label") {
  const auto t = load_dataset(kGasCsv, Format::kCsv);
  CHECK(t.num_features() == 16);
  CHECK(t.rows.cols() == 16);
  CHECK(std::find(t.feature_names.begin(), t.feature_names.end(), "time") == t.feature_names.end());
  CHECK(t.feature_names.front() == "address");
  CHECK(t.feature_names.back() == "command response");
  REQUIRE(t.labels);
  CHECK(std::count(t.labels->begin(), t.labels->end(), 1) == 3);
}

TEST_CASE("fixture row count matches an independent line count") {
  const auto t = load_dataset(kGasCsv, Format::kCsv);
  CHECK(t.num_rows() == oracle::count_data_lines(kGasCsv));
  CHECK(t.num_rows() == 20);
}

TEST_CASE("fit_scaler matches a streaming min/max fold") {
  const auto t = load_dataset(kGasCsv, Format::kCsv);
  const auto s = fit_scaler(t);
  const auto folded = oracle::fold_extrema(kGasCsv);
  for (std::size_t k = 0; k < t.num_features(); ++k) {
    const auto it = std::find(folded.names.begin(), folded.names.end(), t.feature_names[k]);
    REQUIRE(it != folded.names.end());
    const auto c = static_cast<std::size_t>(it - folded.names.begin());
    CHECK(s.minimum[static_cast<Eigen::Index>(k)] == folded.lo[c]);
    CHECK(s.maximum[static_cast<Eigen::Index>(k)] == folded.hi[c]);
  }
}

TEST_CASE("arff with quoted names, comments and a nominal label") {
  const auto t = load_dataset(kArff, Format::kArff);
  CHECK(t.feature_names == std::vector<std::string>{"address", "pressure measurement", "setpoint"});
  CHECK(t.num_rows() == 4);
  REQUIRE(t.labels);
  CHECK(*t.labels == std::vector<int>{0, 0, 1, 0});
  CHECK(t.rows(2, 1) == doctest::Approx(9.25));
}

TEST_CASE("parse errors name the line") {
  CHECK_THROWS_AS(parse_dataset("", Format::kCsv), ParseError);
  CHECK_THROWS_AS(parse_dataset("", Format::kArff), ParseError);
  try {
    parse_dataset("a,b\n1,2\n3\n", Format::kCsv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  try {
    parse_dataset("a,b\n1,2\n3,x\n", Format::kCsv);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_dataset("a,label\n1,maybe\n", Format::kCsv), ParseError);
  CHECK_THROWS_AS(parse_dataset("@relation r\n@attribute a string\n@data\nx\n", Format::kArff),
                  ParseError);
}

TEST_CASE("csv without a label column is unlabelled") {
  const auto t = parse_dataset("x,y\n1,2\n3,4\n", Format::kCsv);
  CHECK_FALSE(t.labels);
  CHECK(t.num_rows() == 2);
  const auto l = parse_dataset("x,Label\n1,attack\n3,normal\n", Format::kCsv);
  REQUIRE(l.labels);
  CHECK(*l.labels == std::vector<int>{1, 0});
}

TEST_CASE("parse_format") {
  CHECK(parse_format("csv") == Format::kCsv);
  CHECK(parse_format("arff") == Format::kArff);
  CHECK_THROWS_AS(parse_format("xlsx"), InvalidArgument);
}

TEST_CASE("scaler basics") {
  Eigen::MatrixXd one(1, 3);
  one << 1, 2, 3;
  const auto s1 = fit_scaler(table_from(one));
  CHECK(s1.minimum == one.row(0).transpose());
  CHECK(s1.maximum == one.row(0).transpose());

  Eigen::MatrixXd col(3, 2);
  col << 2, 5, 4, 5, 6, 5;
  const auto t = table_from(col);
  const auto s = fit_scaler(t);
  CHECK(s.minimum[0] == 2);
  CHECK(s.maximum[0] == 6);
  const auto scaled = apply_scaler(s, t);
  CHECK(scaled.rows(0, 0) == 0.0);
  CHECK(scaled.rows(2, 0) == 1.0);
  CHECK(scaled.rows(1, 0) == 0.5);
  CHECK(scaled.rows.col(1).isZero());

  CHECK_THROWS(fit_scaler(table_from(Eigen::MatrixXd(0, 2))));
  CHECK_THROWS(apply_scaler(s, table_from(Eigen::MatrixXd::Zero(2, 3))));
}

TEST_CASE("scaling round trip and range on the fixture") {
  const auto t = load_dataset(kGasCsv, Format::kCsv);
  const auto s = fit_scaler(t);
  const auto scaled = apply_scaler(s, t);
  CHECK(scaled.rows.minCoeff() >= 0.0);
  CHECK(scaled.rows.maxCoeff() <= 1.0);
  const auto back = invert_scaler(s, scaled);
  for (Eigen::Index k = 0; k < t.rows.cols(); ++k) {
    if (s.minimum[k] == s.maximum[k]) continue;
    for (Eigen::Index r = 0; r < t.rows.rows(); ++r) {
      CHECK(std::abs(back.rows(r, k) - t.rows(r, k)) <= 1e-12 * std::max(1.0, std::abs(t.rows(r, k))));
    }
  }
}

TEST_CASE("scaling properties on random tables") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = 1 + static_cast<Eigen::Index>(rng.below(20));
    const auto m = 1 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-50, 50);
    const auto t = table_from(x);
    const auto s = fit_scaler(t);
    const auto scaled = apply_scaler(s, t);
    CHECK(scaled.rows.minCoeff() >= 0.0);
    CHECK(scaled.rows.maxCoeff() <= 1.0);
    const auto back = invert_scaler(s, scaled);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (s.minimum[k] == s.maximum[k]) continue;
      CHECK((back.rows.col(k) - x.col(k)).cwiseAbs().maxCoeff() <= 1e-12 * 50);
    }
  }
}

TEST_CASE("make_windows") {
  Eigen::MatrixXd x(5, 2);
  x << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const auto t = table_from(x, std::vector<int>{0, 0, 1, 0, 0});
  const auto w = make_windows(t, 3);
  REQUIRE(w.size() == 3);
  CHECK(w[0].start_index == 0);
  CHECK(w[2].start_index == 2);
  CHECK(w[0].label == 1);
  CHECK(w[1].label == 1);
  CHECK(w[2].label == 1);
  CHECK(w[1].values == x.middleRows(1, 3));

  const auto whole = make_windows(t, 5);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0].values == x);

  CHECK_THROWS(make_windows(t, 0));
  CHECK_THROWS(make_windows(t, 6));
}

TEST_CASE("window laws hold for every small labelling") {
  for (std::size_t n = 1; n <= 7; ++n) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 0.1 * static_cast<double>(i) + 0.37;
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1U;
      const auto t = table_from(x, labels);
      for (std::size_t l = 1; l <= n; ++l) {
        const auto w = make_windows(t, l);
        REQUIRE(w.size() == n - l + 1);
        for (std::size_t i = 0; i < w.size(); ++i) {
          CHECK(w[i].start_index == i);
          int any = 0;
          for (std::size_t r = i; r < i + l; ++r) any |= labels[r];
          CHECK(w[i].label == any);
          for (std::size_t r = 0; r < l; ++r) {
            CHECK((w[i].values.row(static_cast<Eigen::Index>(r)).array() ==
                   x.row(static_cast<Eigen::Index>(i + r)).array()).all());
          }
        }
      }
    }
  }
}

TEST_CASE("chronological split") {
  Eigen::MatrixXd x(10, 1);
  for (int i = 0; i < 10; ++i) x(i, 0) = i;
  const auto [train, test] = split_train_test(table_from(x), 0.8);
  CHECK(train.num_rows() == 8);
  CHECK(test.num_rows() == 2);
  CHECK(test.rows(0, 0) == 8);
  CHECK_THROWS(split_train_test(table_from(x), 1.0));
  CHECK_THROWS(split_train_test(table_from(x), 0.0));
}

TEST_CASE("normal filtering") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const auto t = table_from(x, std::vector<int>{0, 1, 0, 0});
  const auto normal = normal_rows(t);
  CHECK(normal.num_rows() == 3);
  CHECK(normal.rows(1, 0) == 3);
  const auto w = normal_windows(make_windows(t, 2));
  REQUIRE(w.size() == 1);
  CHECK(w[0].start_index == 2);
  CHECK(normal_rows(table_from(x)).num_rows() == 4);
}
