#pragma once

// Density functions g, g' with homogeneity metadata. Values are immutable;
// evaluation clamps to zero outside the declared support.

#include <memory>
#include <optional>

#include "otlab/geometry.hpp"

namespace otlab {

enum class DensityKind { Uniform, MonomialYn, RadialHomog, HolderPerturbed };

class Density {
 public:
  // --- factories ---
  static Density uniform(double c = 1.0) {
    Density d;
    d.kind_ = DensityKind::Uniform;
    d.c_ = c;
    d.homogeneity_ = 0.0;
    return d;
  }

  // c * (x2)_+^k
  static Density monomial_yn(double k, double c = 1.0) {
    if (k < 0.0) throw Error("monomial_yn: exponent must be >= 0");
    Density d;
    d.kind_ = DensityKind::MonomialYn;
    d.c_ = c;
    d.k_ = k;
    d.homogeneity_ = k;
    return d;
  }

  // c * |x|^l * a(theta); profile sampled uniformly over [0, 2*pi), linear
  // interpolation with wrap-around. Empty profile means a == 1.
  static Density radial_homog(double l, std::vector<double> profile = {},
                              double c = 1.0) {
    if (l < 0.0) throw Error("radial_homog: exponent must be >= 0");
    for (double a : profile)
      if (a < 0.0) throw Error("radial_homog: profile must be nonnegative");
    Density d;
    d.kind_ = DensityKind::RadialHomog;
    d.c_ = c;
    d.l_ = l;
    d.profile_ = std::move(profile);
    d.homogeneity_ = l;
    return d;
  }

  // base * (1 + a * |x|^alpha), |a| < 1 keeps it pinched between constants.
  static Density holder_perturbed(Density base, double amplitude,
                                  double alpha) {
    if (!(alpha > 0.0)) throw Error("holder_perturbed: alpha must be > 0");
    if (!(std::abs(amplitude) < 1.0))
      throw Error("holder_perturbed: |amplitude| must be < 1");
    Density d;
    d.kind_ = DensityKind::HolderPerturbed;
    d.base_ = std::make_shared<Density>(std::move(base));
    d.holder_a_ = amplitude;
    d.holder_alpha_ = alpha;
    d.homogeneity_ = std::nullopt;  // perturbation breaks homogeneity
    return d;
  }

  Density with_support(HalfPlane h) const {
    Density d = *this;
    d.support_half_ = h;
    return d;
  }
  Density with_support(Sector s) const {
    Density d = *this;
    d.support_sector_ = s;
    return d;
  }
  Density with_constant(double c) const {
    Density d = *this;
    d.c_ = c;
    if (d.kind_ == DensityKind::HolderPerturbed && d.base_) {
      Density b = d.base_->with_constant(c);
      d.base_ = std::make_shared<Density>(std::move(b));
    }
    return d;
  }

  DensityKind kind() const { return kind_; }
  double constant() const { return c_; }
  double monomial_exponent() const { return k_; }
  double radial_exponent() const { return l_; }
  bool profile_empty() const { return profile_.empty(); }
  std::size_t profile_size() const { return profile_.size(); }
  const std::vector<double>& profile_samples() const { return profile_; }
  // Angular factor a(theta) of a RadialHomog density (1 when no profile).
  double profile_value(double theta) const { return profile_at(theta); }
  const Density* base() const { return base_.get(); }
  double holder_amplitude() const { return holder_a_; }
  double holder_alpha() const { return holder_alpha_; }
  std::optional<double> homogeneity_degree() const { return homogeneity_; }
  const std::optional<HalfPlane>& support_half() const { return support_half_; }
  const std::optional<Sector>& support_sector() const { return support_sector_; }
  bool has_support_constraint() const {
    return support_half_.has_value() || support_sector_.has_value();
  }

  // True when the density restricted to {x2 >= 0} is a bivariate polynomial.
  bool polynomial_on_support() const {
    switch (kind_) {
      case DensityKind::Uniform:
        return true;
      case DensityKind::MonomialYn:
        return k_ == std::floor(k_);
      case DensityKind::RadialHomog:
        return l_ == 0.0 && profile_.empty();
      case DensityKind::HolderPerturbed:
        return false;
    }
    return false;
  }

  // Total degree when polynomial_on_support() holds.
  int polynomial_degree() const {
    if (kind_ == DensityKind::MonomialYn) return static_cast<int>(k_);
    return 0;
  }

  // MonomialYn (and Holder over it) vanish on {x2 = 0}: quadrature pre-splits
  // there and grades refinement toward the line.
  bool degenerate_on_y_axis() const {
    if (kind_ == DensityKind::MonomialYn) return k_ > 0.0;
    if (kind_ == DensityKind::HolderPerturbed && base_)
      return base_->degenerate_on_y_axis();
    return false;
  }

  double eval(Vec2 x) const {
    if (support_half_ &&
        support_half_->signed_violation(x) > kTolGeom)
      return 0.0;
    if (support_sector_ && norm(x) > kTolGeom &&
        !support_sector_->contains_dir(x, 1e-7))
      return 0.0;
    switch (kind_) {
      case DensityKind::Uniform:
        return c_;
      case DensityKind::MonomialYn: {
        if (x.y <= 0.0) return 0.0;
        return c_ * std::pow(x.y, k_);
      }
      case DensityKind::RadialHomog: {
        double r = norm(x);
        double radial = (l_ == 0.0) ? 1.0 : std::pow(r, l_);
        return c_ * radial * profile_at(angle_of(x));
      }
      case DensityKind::HolderPerturbed: {
        double b = base_->eval(x);
        if (b == 0.0) return 0.0;
        double v = b * (1.0 + holder_a_ * std::pow(norm(x), holder_alpha_));
        return std::max(v, 0.0);
      }
    }
    return 0.0;
  }

  // Max relative homogeneity defect over random sample points and the given
  // scale factors: |g(t x) - t^d g(x)| / (t^d |g(x)| + eps).
  double homogeneity_check(int samples, const std::vector<double>& scales,
                           std::uint64_t seed = 12345) const {
    if (!homogeneity_)
      throw Error("homogeneity_check: homogeneity_degree not set");
    const double deg = *homogeneity_;
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      Vec2 x = unit_dir(rng.range(-kPi, kPi)) * rng.range(0.2, 2.0);
      double gx = eval(x);
      for (double t : scales) {
        if (!(t > 0.0)) throw Error("homogeneity_check: scales must be > 0");
        double lhs = eval(t * x);
        double ref = std::pow(t, deg) * gx;
        double defect = std::abs(lhs - ref) / (std::abs(ref) + 1e-300);
        worst = std::max(worst, defect);
      }
    }
    return worst;
  }

 private:
  double profile_at(double theta) const {
    if (profile_.empty()) return 1.0;
    const std::size_t n = profile_.size();
    double t = std::fmod(theta, 2.0 * kPi);
    if (t < 0.0) t += 2.0 * kPi;
    double pos = t / (2.0 * kPi) * static_cast<double>(n);
    std::size_t i = static_cast<std::size_t>(pos) % n;
    double frac = pos - std::floor(pos);
    return profile_[i] * (1.0 - frac) + profile_[(i + 1) % n] * frac;
  }

  DensityKind kind_ = DensityKind::Uniform;
  double c_ = 1.0;
  double k_ = 0.0;
  double l_ = 0.0;
  std::vector<double> profile_;
  std::shared_ptr<const Density> base_;
  double holder_a_ = 0.0;
  double holder_alpha_ = 0.5;
  std::optional<double> homogeneity_;
  std::optional<HalfPlane> support_half_;
  std::optional<Sector> support_sector_;
};

}  // namespace otlab
