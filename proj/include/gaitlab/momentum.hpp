#pragma once
#include "gaitlab/params.hpp"

namespace gaitlab {

PQState to_pq(const PendulumState &st, const WalkerParams &params);
PendulumState from_pq(const PQState &pq, const WalkerParams &params);

// p(t) = p0 e^{-wt}, q(t) = q0 e^{wt}
PQState propagate_continuous(const PQState &pq0, double t, const WalkerParams &params);

// landing: both components shift by the new support displacement
PQState step_transition(const PQState &pq_end, double L);

PQState step_to_step(const PQState &pq0, double L, double T, const WalkerParams &params);

// Back-propagates a mid-step sample to estimated initials, then maps one step.
PQState estimate_initial(const PQState &pq_t, double t_elapsed, const WalkerParams &params);
PQState predict_next_from_instant(const PQState &pq_t, double t_elapsed, double L, double T,
                                  const WalkerParams &params);

} // namespace gaitlab
