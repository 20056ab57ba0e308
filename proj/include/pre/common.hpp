#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pre {

using json = nlohmann::json;

/// Malformed input data (bad record, bad config, bad argument).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a cross-reference or uniqueness rule.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input on which the requested statistic is undefined (all-tied vectors,
/// zero expected disagreement, single-item agreement data, ...).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Remote call failure after exhausting retries, or an unusable backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a. Used for content hashes (cache keys, job ids, config
// fingerprints); stability across platforms and runs matters, std::hash
// does not guarantee it.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t h = kFnvOffset) {
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

/// Hash of a field tuple. Each field is length-prefixed so that
/// ("ab","c") and ("a","bc") never collide.
std::uint64_t hash_fields(const std::vector<std::string_view>& fields);

std::string to_hex16(std::uint64_t v);

/// Derives an independent 64-bit seed from a master seed and a component
/// label, so adding a component never perturbs the streams of the others.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::string_view instance);

/// Reads a line-oriented JSON file (one object per line, UTF-8). Calls
/// `fn(line_number, object)` for every non-blank line. Malformed lines raise
/// ParseError naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

/// Writes one JSON object per line. Overwrites.
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<json>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

/// Runs fn(0..count-1) on up to `workers` threads. Order of execution is
/// unspecified; the first exception is rethrown after all workers stop
/// picking up new indices.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace pre
