#include "embseg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "embseg/errors.hpp"

namespace embseg {
namespace {

Field<double>& head_field(RawHeads<double>& h, int k) { return k == 0 ? h.offset : k == 1 ? h.sigma : h.seed; }
const Field<double>& head_field(const RawHeads<double>& h, int k) {
  return k == 0 ? h.offset : k == 1 ? h.sigma : h.seed;
}

bool all_zero(const Field<double>& f) {
  return std::all_of(f.data().begin(), f.data().end(), [](double v) { return v == 0.0; });
}

}  // namespace

double GradCheckReport::max_rel_error() const noexcept {
  double m = 0.0;
  for (const auto& h : heads) m = std::max(m, h.max_rel_error);
  return m;
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  for (const auto& h : heads) {
    out << h.head << ": max rel " << h.max_rel_error << " over " << h.checked << " (" << h.skipped << " skipped); ";
  }
  out << "seed detached: " << (seed_term_detached ? "yes" : "no");
  return out.str();
}

void GradCheckReport::require() const {
  if (passed()) return;
  std::ostringstream out;
  out << "gradient check failed (tolerance " << tolerance << "): " << summary();
  for (const auto& c : offending) {
    out << "\n  " << c.head << "[" << c.channel << "," << c.row << "," << c.col << "] analytic " << c.analytic
        << " numeric " << c.numeric << " rel " << c.rel_error;
  }
  throw NumericalError(out.str());
}

GradCheckReport grad_check(const LossConfig& config, const RawHeads<double>& heads, const InstanceLabelMap& labels,
                           double tolerance, double step) {
  heads.validate();
  if (heads.shape().height > 16 || heads.shape().width > 16) throw ConfigError("grad_check needs a scene of at most 16x16");
  if (!(step > 0.0) || !(tolerance > 0.0)) throw ConfigError("grad_check step and tolerance must be positive");

  GradCheckReport report;
  report.tolerance = tolerance;
  const auto base = total_loss(heads, labels, config, true);
  const std::uint64_t signature = base.report.sort_signature;
  const std::vector<double>& target = base.report.seed_target;

  RawHeads<double> probe = heads;
  static const char* names[3] = {"offset", "sigma", "seed"};
  for (int k = 0; k < 3; ++k) {
    auto& hr = report.heads[static_cast<std::size_t>(k)];
    hr.head = names[k];
    Field<double>& field = head_field(probe, k);
    const Field<double>& analytic = head_field(base.grad, k);
    for (int c = 0; c < field.channels(); ++c) {
      for (int r = 0; r < field.height(); ++r) {
        for (int x = 0; x < field.width(); ++x) {
          const double original = field(c, r, x);
          field(c, r, x) = original + step;
          const auto plus = total_loss_frozen(probe, labels, config, target, false).report;
          field(c, r, x) = original - step;
          const auto minus = total_loss_frozen(probe, labels, config, target, false).report;
          field(c, r, x) = original;
          if (plus.sort_signature != signature || minus.sort_signature != signature) {
            ++hr.skipped;
            continue;
          }
          const double numeric = (plus.total - minus.total) / (2.0 * step);
          const double a = analytic(c, r, x);
          const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
          ++hr.checked;
          hr.max_rel_error = std::max(hr.max_rel_error, rel);
          if (!(rel <= tolerance)) report.offending.push_back({hr.head, c, r, x, a, numeric, rel});
        }
      }
    }
  }

  LossConfig seed_only = config;
  seed_only.weights = {0.0, 1.0, 0.0};
  const auto seed_grad = total_loss(heads, labels, seed_only, true).grad;
  report.seed_term_detached = all_zero(seed_grad.offset) && all_zero(seed_grad.sigma);
  return report;
}

GradCheckScene random_grad_check_scene(GridShape shape, const LossConfig& config, int num_classes,
                                       std::uint64_t seed) {
  shape.validate();
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto integer = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };

  const int count = integer(1, 3);
  std::vector<std::int32_t> raw(shape.pixels(), 0);
  std::vector<int> class_by_old{0};
  for (int k = 1; k <= count; ++k) {
    const int h = integer(1, std::max(1, shape.height / 2));
    const int w = integer(1, std::max(1, shape.width / 2));
    const int r0 = integer(0, shape.height - h);
    const int c0 = integer(0, shape.width - w);
    for (int r = r0; r < r0 + h; ++r) {
      for (int c = c0; c < c0 + w; ++c) raw[static_cast<std::size_t>(r) * shape.width + c] = k;
    }
    class_by_old.push_back(integer(0, num_classes - 1));
  }

  GradCheckScene scene{RawHeads<double>::zeros(shape, config.sigma_channels(), num_classes),
                       compact_labels(shape, raw, class_by_old)};
  const double sigma_center = raw_from_sigma(uniform(0.08, 0.3));
  for (double& v : scene.heads.offset.data()) v = uniform(-0.8, 0.8);
  for (double& v : scene.heads.sigma.data()) v = sigma_center + uniform(-0.5, 0.5);
  for (double& v : scene.heads.seed.data()) v = uniform(-2.0, 2.0);
  return scene;
}

}  // namespace embseg
