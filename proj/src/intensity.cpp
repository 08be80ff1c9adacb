#include "tahp/intensity.hpp"

#include <cmath>

namespace tahp {

using ad::Matrix;

IntensityView IntensityView::of(const ModelParams& params, const ModelConfig& cfg) {
  return {params.at("intensity.base"), params.at("intensity.w_alpha"),
          params.at("intensity.w_hist"), cfg.softplus_beta};
}

double softplus_value(double x, double beta) {
  return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
}

IntensityTable IntensityTable::build(const EventSequence& seq, const Matrix& h,
                                     const IntensityView& view) {
  if (static_cast<std::size_t>(h.rows()) != seq.size()) {
    throw ShapeError("intensity: hidden matrix " + ad::shape_str(h) +
                     " does not match sequence length " +
                     std::to_string(seq.size()));
  }
  IntensityTable table;
  table.slope = h * view.w_alpha.transpose();
  table.offset = h * view.w_hist.transpose();
  table.offset.rowwise() += view.base.row(0);
  table.times = seq.times();
  table.beta = view.beta;
  return table;
}

double IntensityTable::lambda_c_anchored(int c, int anchor, double dt) const {
  const double z =
      slope(anchor, c) * (dt / times[static_cast<std::size_t>(anchor)]) +
      offset(anchor, c);
  return softplus_value(z, beta);
}

double IntensityTable::lambda_total_anchored(int anchor, double dt) const {
  const double g = dt / times[static_cast<std::size_t>(anchor)];
  double total = 0.0;
  for (Eigen::Index c = 0; c < slope.cols(); ++c) {
    total += softplus_value(slope(anchor, c) * g + offset(anchor, c), beta);
  }
  return total;
}

namespace {

int anchor_index(const EventSequence& seq, double t) {
  if (seq.empty()) throw DomainError("intensity: empty sequence");
  if (t < seq.events.front().t) {
    throw DomainError("intensity: t=" + std::to_string(t) +
                      " precedes the first event at " +
                      std::to_string(seq.events.front().t));
  }
  int i = static_cast<int>(seq.size()) - 1;
  while (i > 0 && seq.events[static_cast<std::size_t>(i)].t > t) --i;
  return i;
}

}  // namespace

double lambda_c(int c, double t, const EventSequence& seq, const Matrix& h,
                const IntensityView& view) {
  if (c < 0 || c >= view.base.cols()) {
    throw DomainError("lambda_c: type " + std::to_string(c) + " outside [0, " +
                      std::to_string(view.base.cols()) + ")");
  }
  const int i = anchor_index(seq, t);
  const IntensityTable table = IntensityTable::build(seq, h, view);
  return table.lambda_c_anchored(c, i, t - seq.events[static_cast<std::size_t>(i)].t);
}

double lambda_total(double t, const EventSequence& seq, const Matrix& h,
                    const IntensityView& view) {
  const int i = anchor_index(seq, t);
  const IntensityTable table = IntensityTable::build(seq, h, view);
  return table.lambda_total_anchored(i,
                                     t - seq.events[static_cast<std::size_t>(i)].t);
}

}  // namespace tahp
