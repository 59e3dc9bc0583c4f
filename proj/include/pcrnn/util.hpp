#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace pcrnn {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for (global seed, stage tag, index). Stages and items draw from
/// independent streams, so any single stage can be rerun in isolation.
std::uint64_t derive_seed(std::uint64_t global, std::string_view tag, std::uint64_t index = 0);

/// Worker count from PCRNN_WORKERS (default 1, clamped to >= 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Items are claimed in
/// index order; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Reads a whole file; throws ArtifactError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace pcrnn
