#pragma once

#include "sensi/actions.hpp"
#include "sensi/frame_diff.hpp"
#include "sensi/frames.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sensi {

/// The environment side of the loop. A handle is single-owner: callers must
/// not step one handle from several threads at once.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Observation reset() = 0;
    virtual Observation step(const ActionCommand& cmd) = 0;

    /// Authoritative diff of the last transition, when the environment knows
    /// its own state. Remote environments return std::nullopt.
    virtual std::optional<FrameDiff> ground_truth_diff() const = 0;
    virtual bool has_ground_truth() const { return false; }

    virtual std::vector<HudRegion> hud_regions() const = 0;
    virtual std::string game_id() const = 0;
};

}  // namespace sensi
