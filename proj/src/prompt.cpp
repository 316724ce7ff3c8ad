#include "sensi/prompt.hpp"

#include "sensi/codec.hpp"
#include "sensi/errors.hpp"

#include <sstream>

namespace sensi {

using nlohmann::json;

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::FrameDiff: return "frame_diff";
    case Stage::MetricGen: return "metric_gen";
    case Stage::SenseScore: return "sense_score";
    case Stage::Observer: return "observer";
    case Stage::Actor: return "actor";
    }
    return "observer";
}

std::optional<Stage> parse_stage(std::string_view text) {
    for (auto s : {Stage::FrameDiff, Stage::MetricGen, Stage::SenseScore, Stage::Observer, Stage::Actor})
        if (to_string(s) == text) return s;
    return std::nullopt;
}

std::string PromptBundle::user_text() const {
    std::string out;
    for (const auto& s : sections) {
        out += "## " + s.name + "\n" + s.text;
        if (out.empty() || out.back() != '\n') out += '\n';
        out += '\n';
    }
    return out;
}

const PromptSection* PromptBundle::section(std::string_view name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

json PromptBundle::to_json() const {
    json secs = json::array();
    for (const auto& s : sections) secs.push_back({{"name", s.name}, {"text", s.text}});
    return {{"stage", to_string(stage)}, {"system", system}, {"sections", secs}, {"images", images}};
}

std::string PromptBundle::hash() const { return sha256_hex(to_json().dump()); }

namespace {

constexpr const char* kObserverSystem =
    "You are one of two teammates playing an unfamiliar turn-based game together. Your teammate chooses the "
    "moves; you watch what happens and keep the shared notes.\n"
    "Maintain two lists: guesses (ideas about how the game works that are not yet confirmed) and figured_out "
    "(observations you consider confirmed for the current learning target).\n"
    "When updating the lists:\n"
    "- keep entries that are still consistent with what you see\n"
    "- edit entries when new evidence refines them\n"
    "- remove entries the evidence contradicts\n"
    "- move a guess to figured_out once the evidence confirms it\n"
    "Return the complete updated lists as JSON: {\"guesses\": [...], \"figured_out\": [...]}.";

constexpr const char* kActorSystem =
    "You choose the next move in an unfamiliar turn-based game. Pick the single action that best tells the "
    "current guesses apart, or that makes progress using what is already known.\n"
    "Available actions: RESET, ACTION1 .. ACTION7; ACTION6 needs x and y coordinates.\n"
    "Label the decision GUESS when it explores an unconfirmed idea and INFORMED when it relies on confirmed "
    "knowledge.\n"
    "Return JSON: {\"decision_type\": \"GUESS\" | \"INFORMED\", \"action\": {\"action_id\": \"ACTION1\", "
    "\"coords\": {\"x\": 0, \"y\": 0}}} (coords only for ACTION6).";

constexpr const char* kActorExploitSystem =
    "You choose the next move in a turn-based game whose rules you have studied. Use the known facts to win "
    "the game as directly as possible.\n"
    "Available actions: RESET, ACTION1 .. ACTION7; ACTION6 needs x and y coordinates.\n"
    "Return JSON: {\"decision_type\": \"GUESS\" | \"INFORMED\", \"action\": {\"action_id\": \"ACTION1\"}}.";

constexpr const char* kFrameDiffSystem =
    "Compare two consecutive frames of a grid game and describe what changed.\n"
    "Return JSON with keys added, removed, moved, ui_changes and summary. Objects are "
    "{color, cell_count, bbox: [top, left, bottom, right], cells: [[layer, row, col], ...]}; moves are "
    "{color, cell_count, prev_bbox, new_bbox}; ui_changes are {region_name, description}.";

constexpr const char* kMetricSystem =
    "Given something a player needs to learn about a game, write the criterion a judge will use to score, "
    "from 1 to 10, how well the player has grasped it.\n"
    "Return JSON: {\"learning_metric\": \"...\"}.";

constexpr const char* kSenseSystem =
    "Judge how well the player understands the learning item, using the metric. Score from 1 to 10 and "
    "explain briefly.\n"
    "Return JSON: {\"sense_score\": <integer 1-10>, \"reasoning\": \"...\"}.";

[[noreturn]] void missing(Stage stage, const char* section) {
    throw ValidationError("stage " + std::string(to_string(stage)) + ": missing input for section '" + section + "'");
}

std::string bullet_list(const std::vector<std::string>& items) {
    if (items.empty()) return "(none)\n";
    std::string out;
    for (const auto& i : items) out += "- " + i + "\n";
    return out;
}

std::string numbered_list(const std::vector<std::string>& items) {
    if (items.empty()) return "(none)\n";
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += std::to_string(i + 1) + ". " + items[i] + "\n";
    return out;
}

std::string diff_summary(const std::string& diff_text) {
    try {
        auto j = json::parse(diff_text);
        if (j.is_object() && j.contains("summary") && j["summary"].is_string()) return j["summary"].get<std::string>();
    } catch (const json::exception&) {
    }
    return diff_text.size() > 120 ? diff_text.substr(0, 120) + "..." : diff_text;
}

std::string history_text(const std::vector<TurnRecord>& history, int window) {
    if (window <= 0 || history.empty()) return "no prior turns\n";
    std::size_t first = history.size() > static_cast<std::size_t>(window) ? history.size() - window : 0;
    std::ostringstream out;
    for (std::size_t i = first; i < history.size(); ++i) {
        const auto& t = history[i];
        out << "turn " << t.turn_index << ": " << t.action.label();
        if (t.decision_type) out << " (" << to_string(*t.decision_type) << ")";
        out << " -> score " << t.score << ", " << to_string(t.status);
        if (t.sense_score) out << ", sense " << *t.sense_score;
        out << "; saw: " << diff_summary(t.diff_text) << "\n";
    }
    return out.str();
}

void add_curriculum_sections(PromptBundle& b, const EpistemicState& st) {
    b.sections.push_back({"facts", numbered_list(st.facts)});
    if (st.active_item) {
        b.sections.push_back({"learning target", st.active_item->item_name + "\n"});
        b.sections.push_back({"metric", st.active_item->metric.value_or("(not generated yet)") + "\n"});
    } else {
        b.sections.push_back({"learning target", "(curriculum finished: win the game using the known facts)\n"});
        b.sections.push_back({"metric", "(none)\n"});
    }
    if (st.last_sense)
        b.sections.push_back({"sense feedback", "score " + std::to_string(st.last_sense->score) + "/10: " +
                                                    st.last_sense->reasoning + "\n"});
    else
        b.sections.push_back({"sense feedback", "(no evaluation yet)\n"});
}

void add_frame_section(PromptBundle& b, const Observation& obs, bool images) {
    b.sections.push_back({"current frame", "score " + std::to_string(obs.score) + ", status " +
                                               std::string(to_string(obs.status)) + "\n" +
                                               frame_to_text(obs.frame)});
    if (images) b.images.push_back(png_data_url(render(obs)));
}

}  // namespace

PromptBundle assemble_prompt(Stage stage, const PromptInputs& in) {
    PromptBundle b;
    b.stage = stage;
    switch (stage) {
    case Stage::FrameDiff: {
        if (!in.previous) missing(stage, "previous frame");
        if (!in.observation) missing(stage, "current frame");
        b.system = kFrameDiffSystem;
        b.sections.push_back({"previous frame", frame_to_text(in.previous->frame)});
        b.sections.push_back({"current frame", frame_to_text(in.observation->frame)});
        if (in.attach_images) {
            b.images.push_back(png_data_url(render(*in.previous)));
            b.images.push_back(png_data_url(render(*in.observation)));
        }
        break;
    }
    case Stage::MetricGen:
        if (in.item_name.empty()) missing(stage, "learning item");
        b.system = kMetricSystem;
        b.sections.push_back({"learning item", in.item_name + "\n"});
        break;
    case Stage::SenseScore:
        if (in.item_name.empty()) missing(stage, "learning item");
        if (in.metric.empty()) missing(stage, "metric");
        if (!in.state) missing(stage, "facts");
        b.system = kSenseSystem;
        b.sections.push_back({"learning item", in.item_name + "\n"});
        b.sections.push_back({"metric", in.metric + "\n"});
        b.sections.push_back({"facts", numbered_list(in.state->facts)});
        b.sections.push_back({"figured out", bullet_list(in.figured_out)});
        break;
    case Stage::Observer:
    case Stage::Actor: {
        if (!in.state) missing(stage, "facts");
        if (!in.observation) missing(stage, "current frame");
        bool is_observer = stage == Stage::Observer;
        if (is_observer && !in.v1 && !in.diff) missing(stage, "frame diff");
        b.system = is_observer ? kObserverSystem : (in.exploit ? kActorExploitSystem : kActorSystem);
        if (in.v1)
            b.sections.push_back({"facts", numbered_list(in.state->facts)});
        else
            add_curriculum_sections(b, *in.state);
        if (in.diff) b.sections.push_back({"frame diff", serialize_diff(*in.diff) + "\n"});
        b.sections.push_back({"history", history_text(in.history, in.history_window)});
        b.sections.push_back({"guesses", bullet_list(in.state->guesses)});
        b.sections.push_back({"figured out", bullet_list(in.state->figured_out)});
        add_frame_section(b, *in.observation, in.attach_images);
        break;
    }
    }
    return b;
}

PromptBundle assemble_prompt(Stage stage, const Store& store, const Observation& observation, const FrameDiff* diff,
                             int history_window, bool v1) {
    int next = store.last_turn_index() + 1;
    auto state = store.snapshot(next);
    PromptInputs in;
    in.state = &state;
    in.observation = &observation;
    in.diff = diff;
    in.history_window = history_window;
    in.v1 = v1;
    in.history = store.turns(std::max(0, next - 1 - history_window));
    if (state.active_item) {
        in.item_name = state.active_item->item_name;
        in.metric = state.active_item->metric.value_or("");
    }
    in.figured_out = state.figured_out;
    return assemble_prompt(stage, in);
}

}  // namespace sensi
