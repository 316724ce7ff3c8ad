#pragma once

#include "sensi/store.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace sensi {

/// Edits waiting for the next turn boundary. The run loop is the only consumer.
class EditQueue {
public:
    struct Pending {
        std::int64_t ticket = 0;
        ExternalEdit edit;
        int apply_at_turn = 0;
    };

    /// Returns the ticket; `apply_at_turn` is the turn the edit will precede.
    Pending push(ExternalEdit edit, int apply_at_turn);
    std::vector<Pending> drain();
    std::vector<Pending> pending() const;

private:
    mutable std::mutex mu_;
    std::deque<Pending> items_;
    std::int64_t next_ticket_ = 1;
};

/// Ordered, replayable event log with blocking waits (feeds /events).
class EventBus {
public:
    /// Assigns the next sequence number (starting at 1) and wakes waiters.
    std::int64_t publish(nlohmann::json event);
    /// Events with sequence > `after`, waiting up to `timeout` when none are ready.
    std::vector<nlohmann::json> wait_after(std::int64_t after, std::chrono::milliseconds timeout) const;
    std::int64_t last_sequence() const;
    void close();
    bool closed() const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<nlohmann::json> events_;
    bool closed_ = false;
};

/// Pause/resume/stop flags shared between the run loop and the control API.
class RunControl {
public:
    void pause();
    void resume();
    void request_stop();
    bool paused() const;
    bool stop_requested() const;
    /// Blocks while paused. Returns false when a stop was requested.
    bool wait_until_runnable() const;

    /// Set by the run loop after each committed turn.
    void set_next_turn(int turn);
    int next_turn() const;
    void set_live(bool live);
    bool live() const;

    EditQueue& edits() { return edits_; }
    EventBus& events() { return events_; }
    const EventBus& events() const { return events_; }

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    bool paused_ = false;
    bool stop_ = false;
    bool live_ = false;
    int next_turn_ = 1;
    EditQueue edits_;
    EventBus events_;
};

}  // namespace sensi
