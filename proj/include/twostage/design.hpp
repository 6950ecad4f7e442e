#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace twostage {

enum class Direction { HigherScoreIsLastLabel, HigherScoreIsFirstLabel };

// Threshold rule mapping a score to one of S ordered strata.  Scores exactly
// at a cutpoint fall into the lower interval.
struct SubgroupingRule {
  std::vector<double> cutpoints;    // strictly increasing, length S-1
  std::vector<std::string> labels;  // length S
  Direction direction = Direction::HigherScoreIsLastLabel;

  int n_groups() const { return static_cast<int>(labels.size()); }

  void validate() const {
    if (labels.size() < 2) throw std::invalid_argument("rule needs at least two labels");
    if (cutpoints.size() + 1 != labels.size())
      throw std::invalid_argument("rule needs one fewer cutpoint than labels");
    for (size_t i = 0; i + 1 < cutpoints.size(); ++i)
      if (!(cutpoints[i] < cutpoints[i + 1]))
        throw std::invalid_argument("rule cutpoints must be strictly increasing");
    for (size_t i = 0; i < labels.size(); ++i)
      for (size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j]) throw std::invalid_argument("rule labels must be distinct");
  }

  // Interval index along the score axis: 0 for s <= c0, ..., S-1 for s > c_last.
  int interval_of(double s) const {
    const auto it = std::lower_bound(cutpoints.begin(), cutpoints.end(), s);
    return static_cast<int>(it - cutpoints.begin());
  }

  int label_index_at_interval(int interval) const {
    return direction == Direction::HigherScoreIsLastLabel
               ? interval
               : n_groups() - 1 - interval;
  }

  const std::string& label_at_interval(int interval) const {
    return labels[static_cast<size_t>(label_index_at_interval(interval))];
  }

  const std::string& label_of(double s) const { return label_at_interval(interval_of(s)); }

  int label_index_of(double s) const { return label_index_at_interval(interval_of(s)); }
};

enum class DesignSource { PointEstimate, PosteriorDraw };

// One labeling of the evaluation subjects.
struct SubgroupDesign {
  std::vector<int> label_ix;  // index into rule.labels
  DesignSource source = DesignSource::PointEstimate;
  int draw = -1;  // posterior draw index when source == PosteriorDraw
};

inline SubgroupDesign subgroup_from_scores(const std::vector<double>& scores,
                                           const SubgroupingRule& rule,
                                           DesignSource source = DesignSource::PointEstimate,
                                           int draw = -1) {
  rule.validate();
  SubgroupDesign d;
  d.source = source;
  d.draw = draw;
  d.label_ix.resize(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("non-finite score");
    d.label_ix[i] = rule.label_index_of(scores[i]);
  }
  return d;
}

}  // namespace twostage
