#pragma once

#include <stdexcept>
#include <string>

namespace ringlm {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape / dimension contract violations in tensor ops.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid model or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Invalid partition plan (counts don't sum, too many nodes, ...).
class PlanError : public Error {
public:
    using Error::Error;
};

// Token id outside the vocabulary.
class TokenError : public Error {
public:
    using Error::Error;
};

// Degenerate sampling distribution (e.g. all logits -inf).
class SamplingError : public Error {
public:
    using Error::Error;
};

// Weight file parse failures, by kind.
class WeightIoError : public Error {
public:
    enum class Kind { io, bad_magic, bad_version, truncated, bad_shape };

    WeightIoError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Activation frame encode/decode/read failures, by kind.
class FrameError : public Error {
public:
    enum class Kind { bad_magic, bad_version, bad_type, size_limit, length_mismatch, truncated };

    FrameError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Socket-level failures.
class NetError : public Error {
public:
    using Error::Error;
};

// Control-plane setup failures (init rejected, deadline expired, ...).
class SetupError : public Error {
public:
    using Error::Error;
};

// Ring protocol violations observed at runtime (bad sample id, out-of-order step).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Generation cannot proceed (cache overflow, ring connection lost mid-run).
class GenerationError : public Error {
public:
    using Error::Error;
};

// A pipeline role failed and poisoned its queues.
class PipelineError : public Error {
public:
    using Error::Error;
};

} // namespace ringlm
