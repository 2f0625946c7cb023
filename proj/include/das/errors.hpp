#pragma once

#include <stdexcept>
#include <string>

namespace das {

/// Invalid argument or inconsistent configuration (bad topology, misaligned
/// map config, overlapping regions, malformed scenario).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The allocator could not find a free block large enough.
class AllocFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// das_free on an address that is not the base of a live region.
class InvalidFree : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the engine when a run cannot complete (unmapped address,
/// deadlocked barrier, unknown DMA transfer).
class SimFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace das
