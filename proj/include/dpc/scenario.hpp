#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpc/plant.hpp"
#include "dpc/rng.hpp"

namespace dpc {

// Synthetic server-load trace sampled at the plant's step length.
struct LoadProfile {
    std::vector<double> samples;  // kW
    int days = 0;
    std::uint64_t seed = 0;
    double dt = 0;

    void save_csv(const std::string& path) const;
    static LoadProfile load_csv(const std::string& path, double dt);
};

// One training/evaluation scenario: initial condition plus a load window.
// load_history0 is newest-first and load_history0[0] == load_preview[0]
// (both refer to the current step). The preview holds 2N-1 samples so every
// step of an N-step rollout still sees a full N-step lookahead.
struct SampledContext {
    double t_r0 = 0;
    std::vector<double> t_s0;
    std::vector<double> load_history0;
    std::vector<double> load_preview;
};

struct Dataset {
    std::vector<SampledContext> train;
    std::vector<SampledContext> dev;
    std::uint64_t seed = 0;
    int horizon = 0;
    std::uint64_t plant_hash = 0;

    void save_manifest(const std::string& path) const;
};

// Daily pattern: night and day amplitude drawn per day, raised-cosine
// transitions over 4 h windows, white noise at 2% of the local amplitude,
// samples clamped to [0, plant total capacity].
LoadProfile generate_profile(int days, const PlantParams& plant, std::uint64_t seed);

SampledContext sample_context(const PlantParams& plant, int horizon, Rng& rng);

Dataset build_dataset(const PlantParams& plant, int horizon, int n_train, int n_dev,
                      std::uint64_t seed);

// Constant-level profile with a single step change, used by the
// regularization ablation experiments.
LoadProfile make_step_profile(double level_before, double level_after, int step_at, int total_steps,
                              const PlantParams& plant);

}  // namespace dpc
