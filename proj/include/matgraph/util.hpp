#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace matgraph {

/// 64-bit FNV-1a. Stable across platforms, used wherever a seed is derived from text.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Combines two seeds into one (splitmix64 finalizer over their mix).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Exceptions from any
/// task are rethrown (the first by index) after all tasks finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(std::span<const double> values);

/// Fixed six-decimal rendering used in every CSV and table output.
std::string format_fixed(double value, int decimals = 6);

}  // namespace matgraph
