#pragma once

#include "sensi/frame_diff.hpp"
#include "sensi/frames.hpp"
#include "sensi/store.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sensi {

enum class Stage { FrameDiff, MetricGen, SenseScore, Observer, Actor };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

inline constexpr int kDefaultHistoryWindow = 10;

struct PromptSection {
    std::string name;
    std::string text;
};

struct PromptBundle {
    Stage stage = Stage::Observer;
    std::string system;
    std::vector<PromptSection> sections;
    std::vector<std::string> images;  // PNG data URLs

    /// Sections rendered as "## name" blocks in order.
    std::string user_text() const;
    const PromptSection* section(std::string_view name) const;
    nlohmann::json to_json() const;
    /// SHA-256 over the canonical JSON form.
    std::string hash() const;
};

struct PromptInputs {
    const EpistemicState* state = nullptr;
    const Observation* observation = nullptr;
    const Observation* previous = nullptr;  // frame-diff stage only
    const FrameDiff* diff = nullptr;
    std::vector<TurnRecord> history;  // oldest first; only the last `history_window` are shown
    int history_window = kDefaultHistoryWindow;
    bool v1 = false;  // no curriculum, the Observer reads raw frames
    bool exploit = false;  // curriculum finished: the Actor plays to win
    bool attach_images = false;
    std::string item_name;  // metric-gen and sense-score stages
    std::string metric;  // sense-score stage
    std::vector<std::string> figured_out;  // sense-score stage
};

/// Pure function of its inputs. Throws ValidationError naming the stage and
/// the section when a required input is missing.
PromptBundle assemble_prompt(Stage stage, const PromptInputs& inputs);

/// Gathers the snapshot and history from the store, then assembles.
PromptBundle assemble_prompt(Stage stage, const Store& store, const Observation& observation,
                             const FrameDiff* diff, int history_window = kDefaultHistoryWindow, bool v1 = false);

}  // namespace sensi
