#include "sensi/control.hpp"

namespace sensi {

EditQueue::Pending EditQueue::push(ExternalEdit edit, int apply_at_turn) {
    std::lock_guard lock(mu_);
    Pending p{next_ticket_++, std::move(edit), apply_at_turn};
    items_.push_back(p);
    return p;
}

std::vector<EditQueue::Pending> EditQueue::drain() {
    std::lock_guard lock(mu_);
    std::vector<Pending> out(items_.begin(), items_.end());
    items_.clear();
    return out;
}

std::vector<EditQueue::Pending> EditQueue::pending() const {
    std::lock_guard lock(mu_);
    return {items_.begin(), items_.end()};
}

std::int64_t EventBus::publish(nlohmann::json event) {
    std::int64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = static_cast<std::int64_t>(events_.size()) + 1;
        event["seq"] = seq;
        events_.push_back(std::move(event));
    }
    cv_.notify_all();
    return seq;
}

std::vector<nlohmann::json> EventBus::wait_after(std::int64_t after, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || static_cast<std::int64_t>(events_.size()) > after; });
    std::vector<nlohmann::json> out;
    for (auto i = std::max<std::int64_t>(after, 0); i < static_cast<std::int64_t>(events_.size()); ++i)
        out.push_back(events_[static_cast<std::size_t>(i)]);
    return out;
}

std::int64_t EventBus::last_sequence() const {
    std::lock_guard lock(mu_);
    return static_cast<std::int64_t>(events_.size());
}

void EventBus::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool EventBus::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

void RunControl::pause() {
    std::lock_guard lock(mu_);
    paused_ = true;
}

void RunControl::resume() {
    {
        std::lock_guard lock(mu_);
        paused_ = false;
    }
    cv_.notify_all();
}

void RunControl::request_stop() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
}

bool RunControl::paused() const {
    std::lock_guard lock(mu_);
    return paused_;
}

bool RunControl::stop_requested() const {
    std::lock_guard lock(mu_);
    return stop_;
}

bool RunControl::wait_until_runnable() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !paused_ || stop_; });
    return !stop_;
}

void RunControl::set_next_turn(int turn) {
    std::lock_guard lock(mu_);
    next_turn_ = turn;
}

int RunControl::next_turn() const {
    std::lock_guard lock(mu_);
    return next_turn_;
}

void RunControl::set_live(bool live) {
    std::lock_guard lock(mu_);
    live_ = live;
}

bool RunControl::live() const {
    std::lock_guard lock(mu_);
    return live_;
}

}  // namespace sensi
