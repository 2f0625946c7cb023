#pragma once

#include <cstdint>
#include <vector>

namespace das {

/// Per-bank reservation calendar: each bank serves one access per cycle.
/// A request books the first free cycle at or after its arrival. Bookings
/// must stay within a sliding window of 2^horizon_log2 cycles.
class BankCalendar {
public:
    BankCalendar(std::uint32_t banks, unsigned horizon_log2 = 14);

    std::uint64_t book(std::uint32_t bank, std::uint64_t earliest);

    /// Release history before `now`; call with nondecreasing values.
    void advance(std::uint64_t now);

    std::uint64_t horizon() const { return std::uint64_t{words_} * 64; }

private:
    std::uint32_t banks_;
    std::uint32_t words_;
    std::uint64_t cleared_word_ = 0;  // first live 64-cycle word
    std::vector<std::uint64_t> bits_;  // [word][bank]
};

}  // namespace das
