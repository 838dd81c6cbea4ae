#pragma once

#include <atomic>
#include <functional>
#include <vector>

#include "memroute/common.hpp"
#include "memroute/tensor.hpp"

namespace memroute {

// Reverse-mode tape. Constructing a Tape makes it the active tape for scalar
// type T on this thread; ops record backward closures onto it in forward
// (topological) order. backward() seeds the loss gradient and replays the
// closures once, in reverse. A tape is single-use.
template <typename T>
class Tape {
public:
    Tape() : id_(next_id()) { stack().push_back(this); }
    ~Tape() { stack().pop_back(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() {
        auto& s = stack();
        return s.empty() ? nullptr : s.back();
    }

    std::uint64_t id() const { return id_; }

    void record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

    std::size_t size() const { return nodes_.size(); }

    void backward(Tensor<T> loss) {
        if (used_)
            throw Error("backward() called twice on the same tape; create a new tape");
        if (!loss.defined() || loss.size() != 1)
            throw ShapeError("backward() requires a scalar loss, got shape " +
                             (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
        if (loss.creator_tape() != id_)
            throw Error("loss is not attached to this tape (detached graph)");
        used_ = true;
        loss.grad_buffer()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    static std::vector<Tape*>& stack() {
        thread_local std::vector<Tape*> s;
        return s;
    }
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{0};
        return ++counter;
    }
    std::vector<std::function<void()>> nodes_;
    std::uint64_t id_ = 0;
    bool used_ = false;
};

}  // namespace memroute
