#pragma once

#include <span>
#include <string>
#include <vector>

#include "vpl/metrics.hpp"

namespace vpl {

// One labeled bar group inside a question-type panel (e.g. the training
// ground-truth distribution, or one predictor's wrong answers).
struct DistChartGroup {
    std::string label;
    std::vector<AnswerShare> bars;
};

struct DistChartPanel {
    std::string type_name;
    std::vector<DistChartGroup> groups;
};

std::string svg_distribution(std::span<const DistChartPanel> panels);

// Twin-axis line chart over epochs 1..N: accuracy on the left axis, LP on the
// right. Both series must have the same length.
std::string svg_convergence(std::span<const double> val_acc, std::span<const double> val_lp);

}  // namespace vpl
