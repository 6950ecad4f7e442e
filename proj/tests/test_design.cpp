#include <vector>

#include "doctest.h"
#include "twostage/design.hpp"

using namespace twostage;

namespace {

SubgroupingRule three_strata() {
  SubgroupingRule rule;
  rule.cutpoints = {0.1, 0.2};
  rule.labels = {"LR", "MR", "UR"};
  return rule;
}

}  // namespace

TEST_CASE("three-stratum thresholds with ties going down") {
  const SubgroupingRule rule = three_strata();
  CHECK(rule.label_of(0.05) == "LR");
  CHECK(rule.label_of(0.1) == "LR");
  CHECK(rule.label_of(0.15) == "MR");
  CHECK(rule.label_of(0.2) == "MR");
  CHECK(rule.label_of(0.25) == "UR");
}

TEST_CASE("direction flag reverses the label order, not the intervals") {
  SubgroupingRule rule = three_strata();
  rule.direction = Direction::HigherScoreIsFirstLabel;
  CHECK(rule.label_of(0.05) == "UR");
  CHECK(rule.label_of(0.15) == "MR");
  CHECK(rule.label_of(0.9) == "LR");
}

TEST_CASE("two-stratum responder rule") {
  SubgroupingRule rule;
  rule.cutpoints = {0.5};
  rule.labels = {"UR", "LR"};
  CHECK(rule.label_of(0.4999) == "UR");
  CHECK(rule.label_of(0.5) == "UR");
  CHECK(rule.label_of(0.5001) == "LR");
  CHECK(rule.label_index_of(0.9) == 1);
}

TEST_CASE("rule validation") {
  SubgroupingRule rule;
  rule.cutpoints = {};
  rule.labels = {"only"};
  CHECK_THROWS_AS(rule.validate(), std::invalid_argument);

  rule.labels = {"a", "b", "c"};
  rule.cutpoints = {0.3};
  CHECK_THROWS_AS(rule.validate(), std::invalid_argument);

  rule.cutpoints = {0.5, 0.5};
  CHECK_THROWS_AS(rule.validate(), std::invalid_argument);

  rule.cutpoints = {0.3, 0.5};
  rule.labels = {"a", "b", "a"};
  CHECK_THROWS_AS(rule.validate(), std::invalid_argument);

  rule.labels = {"a", "b", "c"};
  CHECK_NOTHROW(rule.validate());
}

TEST_CASE("score vectors map to label indices") {
  const SubgroupingRule rule = three_strata();
  const SubgroupDesign d = subgroup_from_scores({0.0, 0.12, 0.9}, rule);
  CHECK(d.label_ix == std::vector<int>{0, 1, 2});
  CHECK(d.source == DesignSource::PointEstimate);

  const SubgroupDesign pd =
      subgroup_from_scores({0.0}, rule, DesignSource::PosteriorDraw, 7);
  CHECK(pd.source == DesignSource::PosteriorDraw);
  CHECK(pd.draw == 7);

  const double bad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(subgroup_from_scores({0.1, bad}, rule), std::invalid_argument);
}
