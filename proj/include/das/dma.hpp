#pragma once

#include "das/banks.hpp"
#include "das/remap.hpp"
#include "das/topology.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace das {

enum class DmaDirection : std::uint8_t { ToL1, FromL1 };

/// A block transfer between abstract L2 storage and an L1 byte range.
struct DmaTransfer {
    std::uint64_t id = 0;
    std::string name;
    ByteRange l1;
    DmaDirection direction = DmaDirection::ToL1;
};

struct DmaParams {
    std::uint32_t words_per_cycle = 4;  // per backend
    std::uint32_t l2_latency = 100;     // cycles before the first word moves
    friend bool operator==(const DmaParams&, const DmaParams&) = default;
};

/**
 * Splitter + distributor + per-subgroup backends. A started transfer is cut
 * into segments at mapping boundaries; every word of every segment goes to
 * the backend of the subgroup owning its bank. Each backend moves
 * words_per_cycle words per cycle, booking the destination bank for each.
 */
class DmaEngine {
public:
    DmaEngine(const ClusterTopology& topo, DmaParams params, BankCalendar& banks);

    /// Throws SimFault if the id was already started.
    void start(const DmaTransfer& transfer, const RegionTable& regions, std::uint64_t now);

    /// Move one cycle's worth of words. Returns ids that became complete
    /// (their completion cycle is then known).
    std::vector<std::uint64_t> advance(std::uint64_t now);

    bool started(std::uint64_t id) const;
    /// Cycle at which every word has landed, once known.
    std::optional<std::uint64_t> completion(std::uint64_t id) const;
    bool active() const { return pending_jobs_ > 0; }

    /// Segments produced by the splitter for a started transfer.
    const std::vector<TransferSegment>& segments(std::uint64_t id) const;
    /// Number of backends (one per subgroup).
    std::size_t backends() const { return queues_.size(); }

private:
    struct Job {
        std::size_t transfer = 0;
        std::uint64_t ready = 0;
        std::vector<std::uint32_t> banks;
        std::size_t cursor = 0;
    };
    struct State {
        std::uint64_t id = 0;
        std::uint64_t words_left = 0;
        std::uint64_t last_landing = 0;
        std::optional<std::uint64_t> done;
        std::vector<TransferSegment> segments;
    };

    const State* find(std::uint64_t id) const;

    ClusterTopology topo_;
    DmaParams params_;
    BankCalendar& banks_;
    std::vector<std::deque<Job>> queues_;
    std::vector<State> transfers_;
    std::size_t pending_jobs_ = 0;
};

}  // namespace das
