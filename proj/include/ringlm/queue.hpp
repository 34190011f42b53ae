#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "ringlm/error.hpp"

namespace ringlm {

// Bounded FIFO connecting the three pipeline roles of a node. put blocks
// while full, take blocks while empty. close() lets takers drain what is
// left and then receive nullopt; fail() poisons the queue so every pending
// and future operation throws PipelineError.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    void put(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_ || failed_; });
        throw_if_failed();
        if (closed_) {
            throw PipelineError("put on closed queue");
        }
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    std::optional<T> take() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_ || failed_; });
        throw_if_failed();
        if (items_.empty()) {
            return std::nullopt; // closed and drained
        }
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    void fail(const std::string& reason) {
        std::lock_guard lock(mutex_);
        if (!failed_) {
            failed_ = true;
            fail_reason_ = reason;
        }
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

    std::size_t capacity() const { return capacity_; }

private:
    void throw_if_failed() {
        if (failed_) {
            throw PipelineError(fail_reason_);
        }
    }

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    bool closed_ = false;
    bool failed_ = false;
    std::string fail_reason_;
};

} // namespace ringlm
