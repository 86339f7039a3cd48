#pragma once

#include <cstdint>
#include <vector>

#include "wfdiff/core.hpp"

namespace wfdiff {

/// Unbiased (U-statistic) energy distance between samples stored as rows.
double energy_distance(const Matrix& x, const Matrix& y);

/// Unbiased energy distance between the rows of x and N(mean, sd² I). Uses
/// closed-form E‖x − Y‖ for r ≤ 2 and numerical quadrature of the radial
/// integral otherwise.
double energy_distance_gaussian(const Matrix& x, const Vector& mean, double sd);

/// E‖a − Y‖ for Y ~ N(0, sd² I_r) and ‖a‖ = norm.
double expected_gaussian_distance(double norm, double sd, int r);

struct RankSumResult {
  double statistic = 0.0;  // U of the first sample
  double z = 0.0;
  double p_value = 1.0;    // two-sided, normal approximation with tie correction
};

RankSumResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int bins = 0;
};

/// Pearson χ² of observed counts against expected probabilities. Adjacent
/// cells are pooled (in order) until every expected count is ≥ min_expected.
ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probabilities,
                               double min_expected = 5.0);

/// Two-sided normal tail probability.
double normal_two_sided_p(double z);

}  // namespace wfdiff
