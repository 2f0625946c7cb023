#pragma once

#include <coroutine>
#include <exception>
#include <iterator>
#include <utility>

namespace das {

/// Minimal lazy sequence coroutine. Move-only; iterating twice is not
/// supported.
template <typename T>
class Generator {
public:
    struct promise_type {
        const T* current = nullptr;
        std::exception_ptr error;

        Generator get_return_object() { return Generator{handle::from_promise(*this)}; }
        std::suspend_always initial_suspend() noexcept { return {}; }
        std::suspend_always final_suspend() noexcept { return {}; }
        std::suspend_always yield_value(const T& v) noexcept {
            current = std::addressof(v);
            return {};
        }
        void return_void() noexcept {}
        void unhandled_exception() { error = std::current_exception(); }
    };

    using handle = std::coroutine_handle<promise_type>;

    class iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = T;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        explicit iterator(handle h) : h_(h) {}

        const T& operator*() const { return *h_.promise().current; }
        const T* operator->() const { return h_.promise().current; }
        iterator& operator++() {
            h_.resume();
            rethrow();
            return *this;
        }
        void operator++(int) { ++*this; }
        bool operator==(std::default_sentinel_t) const { return !h_ || h_.done(); }

    private:
        void rethrow() const {
            if (h_.done() && h_.promise().error) std::rethrow_exception(h_.promise().error);
        }
        handle h_{};
    };

    Generator() = default;
    explicit Generator(handle h) : h_(h) {}
    Generator(Generator&& o) noexcept : h_(std::exchange(o.h_, {})) {}
    Generator& operator=(Generator&& o) noexcept {
        if (this != &o) {
            reset();
            h_ = std::exchange(o.h_, {});
        }
        return *this;
    }
    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;
    ~Generator() { reset(); }

    iterator begin() {
        if (!h_) return iterator{};
        h_.resume();
        if (h_.done() && h_.promise().error) std::rethrow_exception(h_.promise().error);
        return iterator{h_};
    }
    std::default_sentinel_t end() { return {}; }

    /// Pull-style access used by the engine: advance and return the next
    /// value, or nullptr at the end.
    const T* next() {
        if (!h_ || h_.done()) return nullptr;
        h_.resume();
        if (h_.done()) {
            if (h_.promise().error) std::rethrow_exception(h_.promise().error);
            return nullptr;
        }
        return h_.promise().current;
    }

private:
    void reset() {
        if (h_) h_.destroy();
        h_ = {};
    }
    handle h_{};
};

}  // namespace das
