#include "f2r/eval/audit.hpp"

namespace f2r {

TrainConfig config_for_state(const ModelState& st) {
    TrainConfig tc;
    tc.window = st.arch.window;
    tc.arch = st.arch;
    tc.stacked = st.arch.stacked_input;
    tc.joint_inputs = st.arch.stacked_input
                          ? st.arch.input_ch == (st.arch.window - 1) * 2 * st.arch.data_ch
                          : st.arch.input_ch == 2 * st.arch.data_ch;
    tc.stage = st.mode == Mode::blind ? 1 : 2;
    return tc;
}

double blindness_audit(const ModelState& blind_state, const TemporalWindow& window,
                       const PriorSet& priors, int trials, uint64_t seed) {
    if (blind_state.mode != Mode::blind)
        throw ModeError("blindness_audit: state is not a blind estimator");
    if (trials < 1) throw InputError("blindness_audit: trials must be >= 1");
    const TrainConfig cfg = config_for_state(blind_state);
    if (window.window_size != cfg.window)
        throw InputError("blindness_audit: window size does not match the state");

    const PreparedBlind base = prepare_blind_window(window, priors, cfg);
    std::vector<std::vector<Tensor>> base_flows;
    for (const auto& p : base.pyramids) base_flows.push_back(p.levels);
    const Tensor ref = run_blind(blind_state, base.inputs, base_flows);

    double max_dev = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        TemporalWindow perturbed = window;
        Tensor& center = perturbed.frames[static_cast<std::size_t>(perturbed.center_pos)];
        Rng rng(hash_seed(seed, static_cast<uint64_t>(trial)));
        for (auto& v : center.data) v = static_cast<float>(rng.uniform(-1.0, 2.0));
        const PreparedBlind p =
            prepare_blind_window_with_flows(perturbed, priors, cfg, base.pyramids);
        std::vector<std::vector<Tensor>> flows;
        for (const auto& pyr : p.pyramids) flows.push_back(pyr.levels);
        const Tensor out = run_blind(blind_state, p.inputs, flows);
        max_dev = std::max(max_dev, max_abs_diff(out, ref));
    }
    return max_dev;
}

}  // namespace f2r
