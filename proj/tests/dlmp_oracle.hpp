#pragma once

#include <algorithm>
#include <cmath>

namespace testutil {

// DLMP coefficients evaluated one printed fraction at a time, each over its own copy of
// the denominator, as an oracle independent of the factored implementation.
struct OracleCoefficients {
    double c1, c2, c3, c4, c5;
};

inline OracleCoefficients symbolic_coefficients(double fp, double fq, double l, double r, double x) {
    auto den = [&] { return (std::pow(fp, 2) + std::pow(fq, 2)) * x - l * fq * (std::pow(r, 2) + std::pow(x, 2)); };
    OracleCoefficients o{};
    o.c1 = ((std::pow(fp, 2) + std::pow(fq, 2)) * x + l * fq * (std::pow(r, 2) - std::pow(x, 2))) / den() -
           (2 * l * fp * r * x) / den();
    o.c2 = ((std::pow(fp, 2) + std::pow(fq, 2)) * r - l * fq * (std::pow(r, 2) + std::pow(x, 2))) / den();
    o.c3 = ((std::pow(fp, 2) + std::pow(fq, 2)) * x + l * fq * (std::pow(r, 2) - std::pow(x, 2))) / den() +
           (2 * l * fq * r * x) / den();
    o.c4 = (2 * (std::pow(fp, 3) * r - std::pow(fq, 3) * x)) / den() + (2 * fp * fq * (fp * r - fq * x)) / den();
    o.c5 = (2 * (std::pow(fp, 3) * r - std::pow(fq, 3) * x)) / den() + (2 * fp * fq * (fp * r - fq * x)) / den() +
           (2 * std::pow(l, 2) * (fp * std::pow(r, 3) + fq * std::pow(x, 3))) / den() -
           (4 * l * fq * std::pow(std::pow(r, 2) - x, 2)) / den() +
           (4 * l * r * x * (std::pow(fp, 2) - std::pow(fq, 2))) / den() +
           (2 * std::pow(l, 2) * r * x * (fp * r - fq * x)) / den();
    return o;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testutil
