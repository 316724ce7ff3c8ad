#include "sensi/keyquest.hpp"

#include "sensi/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace sensi::keyquest {

namespace {

int key_color_for(char letter) { return kKeyColors[std::tolower(static_cast<unsigned char>(letter)) - 'a']; }

bool is_generator_letter(char c) { return c == 'a' || c == 'b' || c == 'c'; }
bool is_door_letter(char c) { return c == 'A' || c == 'B' || c == 'C'; }

std::vector<std::vector<Pos>> components(const std::vector<Pos>& cells) {
    std::set<Pos> remaining(cells.begin(), cells.end());
    std::vector<std::vector<Pos>> out;
    while (!remaining.empty()) {
        std::vector<Pos> comp;
        std::vector<Pos> stack{*remaining.begin()};
        remaining.erase(remaining.begin());
        while (!stack.empty()) {
            Pos p = stack.back();
            stack.pop_back();
            comp.push_back(p);
            for (Pos n : {Pos{p.row - 1, p.col}, Pos{p.row + 1, p.col}, Pos{p.row, p.col - 1}, Pos{p.row, p.col + 1}}) {
                auto it = remaining.find(n);
                if (it != remaining.end()) {
                    remaining.erase(it);
                    stack.push_back(n);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

DiffObject as_object(int color, const std::vector<Pos>& cells) {
    std::vector<Cell> out;
    out.reserve(cells.size());
    for (Pos p : cells) out.push_back({0, p.row, p.col});
    return DiffObject::from_cells(color, std::move(out));
}

bool adjacent(Pos a, Pos b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

void load_level(const GameConfig& config, State& s, int level) {
    const LevelSpec& spec = config.levels[level];
    s.level = level;
    s.player = spec.player_start;
    s.inventory.clear();
    s.stars_left.assign(spec.stars.size(), true);
    s.dots_left.assign(spec.energy_dots.size(), true);
    s.doors_closed.assign(spec.doors.size(), true);
}

std::vector<DiffObject> entity_objects(const GameConfig& config, const State& s) {
    std::vector<DiffObject> objects;
    if (s.status == GameStatus::NotPlayed) return objects;
    const LevelSpec& spec = config.levels[s.level];
    for (const auto& comp : spec.wall_components) objects.push_back(as_object(kWallColor, comp));
    for (std::size_t i = 0; i < spec.doors.size(); ++i) {
        if (s.doors_closed[i]) objects.push_back(as_object(spec.doors[i].color, spec.doors[i].cells));
    }
    for (const auto& g : spec.key_generators) objects.push_back(as_object(g.color, {g.pos}));
    for (std::size_t i = 0; i < spec.stars.size(); ++i) {
        if (s.stars_left[i]) objects.push_back(as_object(kStarColor, {spec.stars[i]}));
    }
    for (std::size_t i = 0; i < spec.energy_dots.size(); ++i) {
        if (s.dots_left[i]) objects.push_back(as_object(kEnergyDotColor, {spec.energy_dots[i]}));
    }
    objects.push_back(as_object(kPlayerTopColor, {s.player}));
    objects.push_back(as_object(kPlayerBottomColor, {Pos{s.player.row + 1, s.player.col}}));
    return objects;
}

}  // namespace

std::vector<HudRegion> GameConfig::hud_regions() const {
    return {{"energy", 0, 0, kHudRows - 1, width - 1}, {"inventory", height - 1, 0, height - 1, width - 1}};
}

void GameConfig::finalize() {
    if (height < 8 || width < 4 || height > kMaxGridDim || width > kMaxGridDim) {
        throw ConfigError("keyquest grid must be between 8x4 and 64x64");
    }
    if (initial_energy < 1) throw ConfigError("initial_energy must be >= 1");
    if (energy_dot_bonus < 0) throw ConfigError("energy_dot_bonus must be >= 0");
    if (levels.empty()) throw ConfigError("game config needs at least one level");
    const int rows = height - 1 - kHudRows;
    std::size_t total_dots = 0;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        LevelSpec& lv = levels[li];
        const std::string where = "level " + std::to_string(li + 1);
        if (static_cast<int>(lv.map.size()) != rows) {
            throw ConfigError(where + " map needs " + std::to_string(rows) + " rows, got " + std::to_string(lv.map.size()));
        }
        lv.walls.clear();
        lv.key_generators.clear();
        lv.doors.clear();
        lv.stars.clear();
        lv.energy_dots.clear();
        bool has_player = false;
        std::map<char, std::vector<Pos>> door_cells;
        for (int r = 0; r < rows; ++r) {
            if (static_cast<int>(lv.map[r].size()) != width) {
                throw ConfigError(where + " map row " + std::to_string(r) + " must have " + std::to_string(width) + " columns");
            }
            for (int c = 0; c < width; ++c) {
                const char ch = lv.map[r][c];
                const Pos p{r + kHudRows, c};
                if (ch == '#') {
                    lv.walls.push_back(p);
                } else if (ch == 'P') {
                    if (has_player) throw ConfigError(where + " has more than one player");
                    has_player = true;
                    lv.player_start = p;
                } else if (ch == '*') {
                    lv.stars.push_back(p);
                } else if (ch == 'o') {
                    lv.energy_dots.push_back(p);
                } else if (is_generator_letter(ch)) {
                    lv.key_generators.push_back({p, key_color_for(ch)});
                } else if (is_door_letter(ch)) {
                    door_cells[ch].push_back(p);
                } else if (ch != '.') {
                    throw ConfigError(where + " map has unknown symbol '" + std::string(1, ch) + "'");
                }
            }
        }
        if (!has_player) throw ConfigError(where + " has no player start");
        if (lv.stars.empty()) throw ConfigError(where + " needs at least one star");
        const Pos below{lv.player_start.row + 1, lv.player_start.col};
        if (below.row - kHudRows >= rows || lv.map[below.row - kHudRows][below.col] != '.') {
            throw ConfigError(where + " player start must have open floor below it");
        }
        for (auto& [letter, cells] : door_cells) {
            for (auto& comp : components(cells)) lv.doors.push_back({comp, key_color_for(letter)});
        }
        for (const auto& door : lv.doors) {
            const bool has_generator = std::any_of(lv.key_generators.begin(), lv.key_generators.end(),
                                                   [&](const KeyGenerator& g) { return g.color == door.color; });
            if (!has_generator) throw ConfigError(where + " has a door without a matching key generator");
        }
        for (const auto& g : lv.key_generators) {
            const bool has_door = std::any_of(lv.doors.begin(), lv.doors.end(),
                                              [&](const Door& d) { return d.color == g.color; });
            if (!has_door) throw ConfigError(where + " has a key generator without a matching door");
        }
        // Distinct same-colored entities must not touch, otherwise they would
        // render as one component.
        std::vector<std::pair<int, std::vector<Pos>>> entities;
        for (const auto& d : lv.doors) entities.emplace_back(d.color, d.cells);
        for (const auto& g : lv.key_generators) entities.push_back({g.color, {g.pos}});
        for (Pos s : lv.stars) entities.push_back({kStarColor, {s}});
        for (Pos d : lv.energy_dots) entities.push_back({kEnergyDotColor, {d}});
        for (std::size_t i = 0; i < entities.size(); ++i) {
            for (std::size_t j = i + 1; j < entities.size(); ++j) {
                if (entities[i].first != entities[j].first) continue;
                for (Pos a : entities[i].second) {
                    for (Pos b : entities[j].second) {
                        if (adjacent(a, b)) throw ConfigError(where + " has touching entities of the same color");
                    }
                }
            }
        }
        lv.wall_components = components(lv.walls);
        total_dots += lv.energy_dots.size();
    }
    if (initial_energy + energy_dot_bonus * static_cast<int>(total_dots) > energy_capacity()) {
        throw ConfigError("initial_energy plus all energy dot bonuses exceeds the HUD capacity of " +
                          std::to_string(energy_capacity()) + " pips");
    }
}

GameConfig GameConfig::reference() {
    GameConfig config;
    LevelSpec one;
    one.map = {
        "################",
        "#.......#......#",
        "#.P.....A..*...#",
        "#.......A......#",
        "#.a.....#...o..#",
        "#.......#......#",
        "#.......#......#",
        "#.......#..*...#",
        "#.......#......#",
        "#.......#......#",
        "#.......#......#",
        "#.......#......#",
        "################",
    };
    LevelSpec two;
    two.map = {
        "################",
        "#......#.......#",
        "#.Po..b#.......#",
        "#......B.*.....#",
        "#......B.......#",
        "#......#.......#",
        "#......#.......#",
        "#......#.......#",
        "#......#.......#",
        "#......#.......#",
        "#......#.......#",
        "#......#.......#",
        "################",
    };
    config.levels = {one, two};
    config.finalize();
    return config;
}

GameConfig GameConfig::from_json(const nlohmann::json& j) {
    GameConfig config;
    try {
        config.game_id = j.value("game_id", config.game_id);
        config.height = j.value("height", config.height);
        config.width = j.value("width", config.width);
        config.initial_energy = j.value("initial_energy", config.initial_energy);
        config.energy_dot_bonus = j.value("energy_dot_bonus", config.energy_dot_bonus);
        config.rng_seed = j.value("rng_seed", config.rng_seed);
        if (!j.contains("levels") || !j["levels"].is_array()) throw ConfigError("game config needs a 'levels' list");
        for (const auto& lj : j["levels"]) {
            LevelSpec level;
            level.map = lj.at("map").get<std::vector<std::string>>();
            config.levels.push_back(std::move(level));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad game config: ") + e.what());
    }
    config.finalize();
    return config;
}

GameConfig GameConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read game config " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("game config " + path.string() + " is not valid JSON: " + e.what());
    }
}

nlohmann::json GameConfig::to_json() const {
    nlohmann::json levels_json = nlohmann::json::array();
    for (const auto& lv : levels) levels_json.push_back({{"map", lv.map}});
    return {{"game_id", game_id},
            {"height", height},
            {"width", width},
            {"initial_energy", initial_energy},
            {"energy_dot_bonus", energy_dot_bonus},
            {"rng_seed", rng_seed},
            {"levels", levels_json}};
}

std::string State::key() const {
    std::string k;
    k.reserve(32 + inventory.size() + stars_left.size() + dots_left.size() + doors_closed.size());
    k += static_cast<char>(status);
    k += static_cast<char>(level);
    k += static_cast<char>(score);
    k += static_cast<char>(energy);
    k += static_cast<char>(player.row);
    k += static_cast<char>(player.col);
    for (int c : inventory) k += static_cast<char>('a' + c);
    k += '|';
    for (bool b : stars_left) k += b ? '1' : '0';
    k += '|';
    for (bool b : dots_left) k += b ? '1' : '0';
    k += '|';
    for (bool b : doors_closed) k += b ? '1' : '0';
    return k;
}

State initial_state(const GameConfig& config) {
    State s;
    s.status = GameStatus::NotFinished;
    s.energy = config.initial_energy;
    load_level(config, s, 0);
    return s;
}

std::vector<Pos> player_cells(const State& state) {
    return {state.player, Pos{state.player.row + 1, state.player.col}};
}

State advance(const GameConfig& config, const State& state, const ActionCommand& cmd, StepEvents* events) {
    StepEvents local;
    StepEvents& ev = events ? *events : local;
    ev = {};
    State s = state;
    const LevelSpec& spec = config.levels[s.level];

    int dr = 0, dc = 0;
    switch (cmd.id) {
        case ActionId::Action1: dr = -1; break;
        case ActionId::Action2: dr = 1; break;
        case ActionId::Action3: dc = -1; break;
        case ActionId::Action4: dc = 1; break;
        default: break;
    }

    if (dr != 0 || dc != 0) {
        const auto current = player_cells(s);
        std::vector<Pos> targets;
        for (Pos p : current) {
            const Pos t{p.row + dr, p.col + dc};
            if (std::find(current.begin(), current.end(), t) == current.end()) targets.push_back(t);
        }
        auto is_wall = [&](Pos p) {
            return p.row < config.playfield_top() || p.row >= config.inventory_row() || p.col < 0 ||
                   p.col >= config.width || std::binary_search(spec.walls.begin(), spec.walls.end(), p);
        };
        auto generator_at = [&](Pos p) -> const KeyGenerator* {
            for (const auto& g : spec.key_generators) {
                if (g.pos == p) return &g;
            }
            return nullptr;
        };
        auto closed_door_at = [&](Pos p) -> int {
            for (std::size_t i = 0; i < spec.doors.size(); ++i) {
                if (!s.doors_closed[i]) continue;
                const auto& cells = spec.doors[i].cells;
                if (std::find(cells.begin(), cells.end(), p) != cells.end()) return static_cast<int>(i);
            }
            return -1;
        };

        const bool wall_hit = std::any_of(targets.begin(), targets.end(), is_wall);
        std::vector<const KeyGenerator*> gens;
        std::vector<int> doors;
        if (!wall_hit) {
            for (Pos t : targets) {
                if (const auto* g = generator_at(t)) gens.push_back(g);
                if (int d = closed_door_at(t); d >= 0 && std::find(doors.begin(), doors.end(), d) == doors.end()) {
                    doors.push_back(d);
                }
            }
        }
        if (wall_hit) {
            ev.blocked_by_wall = true;
        } else if (!gens.empty()) {
            for (const auto* g : gens) {
                if (std::find(s.inventory.begin(), s.inventory.end(), g->color) == s.inventory.end()) {
                    s.inventory.push_back(g->color);
                    ev.keys_generated.push_back(g->color);
                }
            }
        } else if (!doors.empty()) {
            const bool all_keys = std::all_of(doors.begin(), doors.end(), [&](int d) {
                return std::find(s.inventory.begin(), s.inventory.end(), spec.doors[d].color) != s.inventory.end();
            });
            if (all_keys) {
                for (int d : doors) {
                    s.doors_closed[d] = false;
                    ev.doors_opened.push_back(d);
                    auto it = std::find(s.inventory.begin(), s.inventory.end(), spec.doors[d].color);
                    if (it != s.inventory.end()) {
                        ev.keys_consumed.push_back(*it);
                        s.inventory.erase(it);
                    }
                }
            }
        } else {
            s.player = {s.player.row + dr, s.player.col + dc};
            ev.moved = true;
            for (Pos t : targets) {
                for (std::size_t i = 0; i < spec.stars.size(); ++i) {
                    if (s.stars_left[i] && spec.stars[i] == t) {
                        s.stars_left[i] = false;
                        ++ev.stars_collected;
                    }
                }
                for (std::size_t i = 0; i < spec.energy_dots.size(); ++i) {
                    if (s.dots_left[i] && spec.energy_dots[i] == t) {
                        s.dots_left[i] = false;
                        ++ev.dots_collected;
                        ev.energy_bonus += config.energy_dot_bonus;
                    }
                }
            }
        }
    }

    s.energy = s.energy - 1 + ev.energy_bonus;
    if (std::none_of(s.stars_left.begin(), s.stars_left.end(), [](bool b) { return b; })) {
        ev.level_completed = true;
        s.score = std::min(s.score + 1, kMaxScore);
        if (s.level + 1 < static_cast<int>(config.levels.size())) {
            load_level(config, s, s.level + 1);
        } else {
            s.status = GameStatus::Win;
        }
    }
    if (s.energy <= 0) {
        s.energy = 0;
        s.status = GameStatus::GameOver;
    }
    return s;
}

Frame render_state(const GameConfig& config, const State& s) {
    Frame frame(1, config.height, config.width);
    if (s.status == GameStatus::NotPlayed) return frame;
    const LevelSpec& spec = config.levels[s.level];
    for (int i = 0; i < s.energy && i < config.energy_capacity(); ++i) {
        frame.at(0, i / config.width, i % config.width) = kPipColor;
    }
    for (std::size_t i = 0; i < s.inventory.size() && static_cast<int>(i) < config.width; ++i) {
        frame.at(0, config.inventory_row(), static_cast<int>(i)) = static_cast<std::uint8_t>(s.inventory[i]);
    }
    for (Pos p : spec.walls) frame.at(0, p.row, p.col) = kWallColor;
    for (std::size_t i = 0; i < spec.doors.size(); ++i) {
        if (!s.doors_closed[i]) continue;
        for (Pos p : spec.doors[i].cells) frame.at(0, p.row, p.col) = static_cast<std::uint8_t>(spec.doors[i].color);
    }
    for (const auto& g : spec.key_generators) frame.at(0, g.pos.row, g.pos.col) = static_cast<std::uint8_t>(g.color);
    for (std::size_t i = 0; i < spec.stars.size(); ++i) {
        if (s.stars_left[i]) frame.at(0, spec.stars[i].row, spec.stars[i].col) = kStarColor;
    }
    for (std::size_t i = 0; i < spec.energy_dots.size(); ++i) {
        if (s.dots_left[i]) frame.at(0, spec.energy_dots[i].row, spec.energy_dots[i].col) = kEnergyDotColor;
    }
    frame.at(0, s.player.row, s.player.col) = kPlayerTopColor;
    frame.at(0, s.player.row + 1, s.player.col) = kPlayerBottomColor;
    return frame;
}

FrameDiff entity_diff(const GameConfig& config, const State& before, const State& after) {
    const auto prev_objects = entity_objects(config, before);
    const auto curr_objects = entity_objects(config, after);
    ObjectDelta delta = match_objects(prev_objects, curr_objects);
    FrameDiff diff;
    diff.added = std::move(delta.added);
    diff.removed = std::move(delta.removed);
    diff.moved = std::move(delta.moved);

    const int before_energy = before.status == GameStatus::NotPlayed ? 0 : std::min(before.energy, config.energy_capacity());
    const int after_energy = after.status == GameStatus::NotPlayed ? 0 : std::min(after.energy, config.energy_capacity());
    if (before_energy != after_energy) {
        diff.ui_changes.push_back(
            {"energy", region_change_description(std::abs(before_energy - after_energy), before_energy, after_energy)});
    }
    const auto& a = before.inventory;
    const auto& b = after.inventory;
    int changed = 0;
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
        const int ca = i < a.size() ? a[i] : kBackgroundColor;
        const int cb = i < b.size() ? b[i] : kBackgroundColor;
        changed += ca != cb;
    }
    if (changed > 0) {
        diff.ui_changes.push_back({"inventory", region_change_description(changed, static_cast<int>(a.size()),
                                                                          static_cast<int>(b.size()))});
    }
    diff.summary = summarize(diff);
    if (after.level != before.level) {
        diff.summary += "; level " + std::to_string(before.level + 1) + " -> " + std::to_string(after.level + 1);
    }
    if (after.status == GameStatus::Win && before.status != GameStatus::Win) diff.summary += "; game won";
    return diff;
}

KeyQuestEnv::KeyQuestEnv(GameConfig config) : config_(std::move(config)) {
    config_.finalize();
}

Observation KeyQuestEnv::observation() const {
    return Observation{render_state(config_, state_), state_.score, state_.status, turn_};
}

Observation KeyQuestEnv::reset() {
    state_ = initial_state(config_);
    turn_ = 0;
    stepped_ = false;
    last_events_ = {};
    return observation();
}

Observation KeyQuestEnv::step(const ActionCommand& cmd) {
    if (state_.status == GameStatus::NotPlayed) throw EnvStateError("step before reset: issue RESET first");
    if (cmd.is_reset()) return reset();
    if (state_.status == GameStatus::GameOver || state_.status == GameStatus::Win) {
        throw EnvStateError("game is " + std::string(to_string(state_.status)) + "; issue RESET to play again");
    }
    cmd.validate(config_.width, config_.height);
    prev_state_ = state_;
    state_ = advance(config_, state_, cmd, &last_events_);
    ++turn_;
    stepped_ = true;
    return observation();
}

std::optional<FrameDiff> KeyQuestEnv::ground_truth_diff() const {
    if (!stepped_) throw EnvStateError("no transition yet: ground truth diff needs at least one step");
    return entity_diff(config_, prev_state_, state_);
}

}  // namespace sensi::keyquest
