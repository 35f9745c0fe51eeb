#pragma once

#include <stdexcept>
#include <string>

namespace dyenet {

// Exit-code mapping used by the CLI: ContractViolation -> 2, IoError -> 3.

class ContractViolation : public std::runtime_error {
public:
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested data (e.g. stored flow files) does not exist on disk.
class MissingDataError : public IoError {
public:
    explicit MissingDataError(const std::string& msg) : IoError(msg) {}
};

// Embedding with pre-normalization norm below threshold; callers reject the proposal.
class DegenerateEmbedding : public std::runtime_error {
public:
    explicit DegenerateEmbedding(const std::string& msg) : std::runtime_error(msg) {}
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int step, const std::string& msg)
        : std::runtime_error(msg), step(step) {}
    int step;
};

// Invalid synthetic dataset description (e.g. shape larger than the frame).
class SpecError : public ContractViolation {
public:
    explicit SpecError(const std::string& msg) : ContractViolation(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace dyenet
