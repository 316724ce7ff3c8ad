#pragma once

#include "sensi/claims.hpp"
#include "sensi/cognition.hpp"

#include <cstdint>
#include <random>

namespace sensi {

enum class CorruptionPolicy { FlipHorizontalDirection, RelabelUiAsDecoration, DropMoves };
std::string_view to_string(CorruptionPolicy policy);
std::optional<CorruptionPolicy> parse_corruption_policy(std::string_view text);

inline constexpr const char* kDecorationLabel = "decorative border pattern";

/// Applies one policy to a diff (always, no randomness).
FrameDiff corrupt(const FrameDiff& diff, CorruptionPolicy policy);

struct CorruptionEvent {
    int turn_index = 0;
    CorruptionPolicy policy = CorruptionPolicy::FlipHorizontalDirection;
    bool changed = false;  // false when the policy had nothing to act on
};

/// Wraps a frame-diff backend and corrupts each reply with probability `rate`.
/// Every reply consumes exactly one uniform draw from a seeded mt19937_64, so
/// for one seed the corrupted turns at a lower rate are a subset of those at a higher one.
class CorruptingDiffer final : public Backend {
public:
    CorruptingDiffer(BackendPtr inner, CorruptionPolicy policy, double rate, std::uint64_t seed);
    std::string name() const override;
    std::string invoke(const StageRequest& request) override;
    const std::vector<CorruptionEvent>& log() const { return log_; }

private:
    BackendPtr inner_;
    CorruptionPolicy policy_;
    double rate_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::vector<CorruptionEvent> log_;
};

enum class CascadeVerdict { Detected, NotDetected, Indeterminate };
std::string_view to_string(CascadeVerdict verdict);

struct ProvenanceTag {
    std::string kind;  // guess, figured_out or fact
    std::string text;
    std::optional<int> origin_turn;  // first turn the text appeared in a hypothesis list
    std::optional<int> source_diff_turn;
    bool corrupted_source = false;
    keyquest::Truth truth = keyquest::Truth::Unverifiable;
};

struct SpuriousValidation {
    int turn_index = 0;
    int phi = 0;
    std::int64_t item_id = 0;
    std::vector<std::string> contradicted;
};

struct CascadeReport {
    std::vector<int> corrupted_diff_turns;
    int contaminated_figured_out = 0;
    int contaminated_facts = 0;
    std::vector<std::string> contaminated_fact_texts;
    std::vector<SpuriousValidation> spurious_validations;
    CascadeVerdict verdict = CascadeVerdict::NotDetected;
    std::vector<ProvenanceTag> provenance;

    nlohmann::json to_json() const;
};

/// Post-hoc, read-only comparison of the run's beliefs against simulator truth.
CascadeReport audit_run(const nlohmann::json& transcript, const Store& store);

}  // namespace sensi
