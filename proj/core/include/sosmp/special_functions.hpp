#pragma once

namespace sosmp {

/// log of the Euler Beta function, log B(a, b), for a, b > 0.
double log_beta(double a, double b);

/// Digamma function psi(x) = d/dx log Gamma(x), for x > 0.
double digamma(double x);

/// Standard normal CDF.
double norm_cdf(double x);

/// Inverse standard normal CDF for p in (0, 1).
double inv_norm_cdf(double p);

/// Standard normal density.
double norm_pdf(double x);

}  // namespace sosmp
