#pragma once
#include <cmath>
#include <stdexcept>
#include <string>

namespace gaitlab {

// Walker constants. Defaults are the benchmark walker (h = 1 m, 50 kg).
struct WalkerParams {
    double h = 1.0;
    double g = 9.8;
    double M = 50.0;
    double I = 4.0;
    double L_max = 0.75;
    double V_max = 3.0;
    double T_0 = 0.05;
    double dz_min = -0.11;
    double dz_max = 0.11;

    // derived on every call so an override of g or h can never leave it stale
    double omega() const { return std::sqrt(g / h); }

    // minimum feasible step period for a displacement L
    double T_min(double L) const { return std::abs(L) / V_max + T_0; }

    void validate() const {
        auto need = [](bool ok, const char *field) {
            if (!ok) throw std::invalid_argument(std::string("invalid walker parameter: ") + field);
        };
        need(std::isfinite(h) && h > 0, "h");
        need(std::isfinite(g) && g > 0, "g");
        need(std::isfinite(M) && M > 0, "M");
        need(std::isfinite(I) && I > 0, "I");
        need(std::isfinite(L_max) && L_max > 0, "L_max");
        need(std::isfinite(V_max) && V_max > 0, "V_max");
        need(std::isfinite(T_0) && T_0 >= 0, "T_0");
        need(dz_min <= 0, "dz_min");
        need(dz_max >= 0, "dz_max");
    }
};

struct PQState {
    double p = 0.0;   // convergent
    double q = 0.0;   // divergent
};

struct PendulumState {
    double s = 0.0;     // x - z_i
    double sdot = 0.0;
};

} // namespace gaitlab
