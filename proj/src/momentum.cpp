#include "gaitlab/momentum.hpp"

#include <cmath>
#include <stdexcept>

namespace gaitlab {

PQState to_pq(const PendulumState &st, const WalkerParams &params) {
    const double w = params.omega();
    return {st.s - st.sdot / w, st.s + st.sdot / w};
}

PendulumState from_pq(const PQState &pq, const WalkerParams &params) {
    const double w = params.omega();
    return {0.5 * (pq.p + pq.q), 0.5 * w * (pq.q - pq.p)};
}

PQState propagate_continuous(const PQState &pq0, double t, const WalkerParams &params) {
    if (!(t >= 0)) throw std::invalid_argument("propagate_continuous: negative duration");
    const double e = std::exp(params.omega() * t);
    return {pq0.p / e, pq0.q * e};
}

PQState step_transition(const PQState &pq_end, double L) {
    return {pq_end.p - L, pq_end.q - L};
}

PQState step_to_step(const PQState &pq0, double L, double T, const WalkerParams &params) {
    if (!(T > 0)) throw std::invalid_argument("step_to_step: step period must be positive");
    return step_transition(propagate_continuous(pq0, T, params), L);
}

PQState estimate_initial(const PQState &pq_t, double t_elapsed, const WalkerParams &params) {
    if (!(t_elapsed >= 0)) throw std::invalid_argument("estimate_initial: negative elapsed time");
    const double e = std::exp(params.omega() * t_elapsed);
    return {pq_t.p * e, pq_t.q / e};
}

PQState predict_next_from_instant(const PQState &pq_t, double t_elapsed, double L, double T,
                                  const WalkerParams &params) {
    if (!(t_elapsed >= 0) || t_elapsed > T)
        throw std::invalid_argument("predict_next_from_instant: elapsed time outside [0, T]");
    // going straight from t to T avoids the round trip through e^{+wt} e^{-wt}
    const PQState at_T = propagate_continuous(pq_t, T - t_elapsed, params);
    return step_transition(at_T, L);
}

} // namespace gaitlab
