#pragma once

#include <json.hpp>

#include "dtpc/capacity.hpp"
#include "dtpc/converse.hpp"
#include "dtpc/id_code.hpp"
#include "dtpc/secrecy.hpp"

namespace dtpc {

inline void to_json(nlohmann::json& j, const DiscreteInputDistribution& d) {
  j = nlohmann::json::array();
  for (int k = 0; k < d.size(); ++k) j.push_back({d.x[k], d.p[k]});
}

inline void to_json(nlohmann::json& j, const CapacityResult& r) {
  j = nlohmann::json{{"capacity_bits", r.capacity_bits},
                     {"support", r.distribution},
                     {"mu", r.mu_bits},
                     {"kkt_max_violation", r.kkt_max_violation_bits},
                     {"kkt_support_residual", r.kkt_support_residual_bits},
                     {"ba_gap", r.ba_gap_bits},
                     {"iterations", r.iterations},
                     {"certified", r.certified}};
}

inline void to_json(nlohmann::json& j, const SidReport& r) {
  j = nlohmann::json{{"c_main", r.main.capacity_bits},
                     {"c_secrecy", r.secrecy.capacity_bits},
                     {"c_sid", r.sid_capacity_bits},
                     {"secrecy_positive", r.secrecy_positive},
                     {"main", r.main},
                     {"secrecy", r.secrecy}};
}

inline void to_json(nlohmann::json& j, const WilsonInterval& w) {
  j = nlohmann::json{{"lower", w.lower}, {"upper", w.upper}};
}

inline void to_json(nlohmann::json& j, const TrialReport& r) {
  j = nlohmann::json{{"trials", r.trials},
                     {"first_kind_rate", r.first_kind_rate},
                     {"first_kind_ci", r.first_kind_ci},
                     {"seed", r.seed}};
  if (r.second_kind_rate) {
    j["second_kind_rate"] = *r.second_kind_rate;
    j["second_kind_ci"] = r.second_kind_ci;
  }
  if (r.worst_pair) j["worst_pair"] = {r.worst_pair->first, r.worst_pair->second};
  if (r.worst_pair_exact_collision)
    j["worst_pair_exact_collision"] = *r.worst_pair_exact_collision;
}

inline void to_json(nlohmann::json& j, const McMutualInformation& m) {
  j = nlohmann::json{
      {"mi_bits", m.mi_bits}, {"jackknife_se_bits", m.jackknife_se_bits}, {"samples", m.samples}};
}

inline void to_json(nlohmann::json& j, const LeakageReport& r) {
  j = nlohmann::json{{"chain_rule_bound_bits", r.chain_rule_bound_bits},
                     {"per_letter_kl_bounds", r.per_letter_kl_bounds},
                     {"pinsker_tv_bound", r.pinsker_tv_bound},
                     {"empirical_lrt_error_sum", r.empirical_lrt_error_sum},
                     {"path", r.path}};
  if (r.exact_mi_bits) j["exact_mi_bits"] = *r.exact_mi_bits;
  if (r.mc_mi) j["mc_mi"] = *r.mc_mi;
}

inline void to_json(nlohmann::json& j, const ConverseRow& r) {
  j = nlohmann::json{{"n", r.n},
                     {"nu", r.nu},
                     {"empirical_tail", r.empirical_tail},
                     {"chebyshev_bound", r.chebyshev_bound},
                     {"samples", r.samples},
                     {"seed", r.seed}};
}

inline void to_json(nlohmann::json& j, const GammaBound& g) {
  j = nlohmann::json{{"lambda", g.lambda},
                     {"p_max", g.p_max},
                     {"alpha", g.alpha},
                     {"beta", g.beta},
                     {"gamma", g.gamma}};
}

}  // namespace dtpc
