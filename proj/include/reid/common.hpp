#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace reid {

using Rng = std::mt19937_64;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (pose JSON, manifest, checkpoint, descriptor matrix).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or inconsistent arguments.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A pipeline stage was asked to run before the stage producing its input.
class MissingPrerequisite : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// Emit a warning line on stderr. Warnings never abort processing.
void warn(const std::string &message);

/// Number of warnings emitted so far in this process.
std::size_t warning_count();

/// Uniform double in [lo, hi).
double uniform(Rng &rng, double lo, double hi);
/// Standard normal draw (Box-Muller, one variate per call).
double normal(Rng &rng);
/// Uniform integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng &rng, std::size_t n);

/// Serialize / restore the full engine state as text.
std::string rng_state(const Rng &rng);
void set_rng_state(Rng &rng, const std::string &state);

/// Hex SHA-1 of `content` framed as a git blob ("blob <n>\0" + content).
std::string git_blob_hash(const std::string &content);

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &content);

} // namespace reid
