/*
   Copyright 2026 The notrade Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace notrade {

/// Row k reads lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1] = rhs[k];
/// lower[0] and upper[n-1] are ignored.
struct Tridiagonal {
    std::vector<double> lower, diag, upper, rhs;

    explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0) {}

    std::size_t size() const { return diag.size(); }

    /// (A x)_k
    double apply_row(std::size_t k, std::span<const double> x) const
    {
        double s = diag[k] * x[k];
        if (k > 0) s += lower[k] * x[k - 1];
        if (k + 1 < size()) s += upper[k] * x[k + 1];
        return s;
    }
};

/// Thomas algorithm. Stable without pivoting for diagonally dominant and
/// M-matrix systems, which is all the solver produces.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& a)
{
    const std::size_t n = a.size();
    std::vector<double> c(n), d(n), x(n);
    double den = a.diag[0];
    if (den == 0.0) throw std::runtime_error("tridiagonal: zero pivot");
    c[0] = n > 1 ? a.upper[0] / den : 0.0;
    d[0] = a.rhs[0] / den;
    for (std::size_t k = 1; k < n; ++k) {
        den = a.diag[k] - a.lower[k] * c[k - 1];
        if (den == 0.0 || !std::isfinite(den)) throw std::runtime_error("tridiagonal: zero pivot");
        c[k] = k + 1 < n ? a.upper[k] / den : 0.0;
        d[k] = (a.rhs[k] - a.lower[k] * d[k - 1]) / den;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) x[k] = d[k] - c[k] * x[k + 1];
    return x;
}

struct MMatrixCheck {
    bool z_pattern = true;         ///< off-diagonals <= 0
    bool positive_diagonal = true;
    bool weighted_dominance = true;  ///< (A w)_k >= 0 for the positive weight w
    bool positive_weight = true;
    std::size_t first_bad_row = 0;

    bool ok() const { return z_pattern && positive_diagonal && weighted_dominance && positive_weight; }
};

/// Structural M-matrix test: Z sign pattern, positive diagonal and
/// generalised diagonal dominance A w >= -slack |A| w for a positive w.
inline MMatrixCheck check_m_matrix(const Tridiagonal& a, std::span<const double> w, double slack = 1e-9)
{
    MMatrixCheck out;
    bool first = true;
    auto flag = [&](std::size_t k) {
        if (first) out.first_bad_row = k;
        first = false;
    };
    for (std::size_t k = 0; k < a.size(); ++k) {
        const bool has_lo = k > 0, has_up = k + 1 < a.size();
        if ((has_lo && a.lower[k] > 0.0) || (has_up && a.upper[k] > 0.0)) {
            out.z_pattern = false;
            flag(k);
        }
        if (!(a.diag[k] > 0.0)) {
            out.positive_diagonal = false;
            flag(k);
        }
        if (!(w[k] > 0.0)) {
            out.positive_weight = false;
            flag(k);
            continue;
        }
        double mag = std::abs(a.diag[k]) * w[k];
        if (has_lo) mag += std::abs(a.lower[k]) * w[k - 1];
        if (has_up) mag += std::abs(a.upper[k]) * w[k + 1];
        if (a.apply_row(k, w) < -slack * mag) {
            out.weighted_dominance = false;
            flag(k);
        }
    }
    return out;
}

}  // namespace notrade
