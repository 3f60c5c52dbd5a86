#ifndef SECS_CHECKPOINT_HPP
#define SECS_CHECKPOINT_HPP

#include "secs/nested_model.hpp"
#include "secs/training.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace secs {

inline constexpr int kCheckpointFormatVersion = 1;

/// Provenance stored next to the weights.
struct CheckpointInfo {
  std::string crop;
  std::optional<TrainConfig> train;
  std::vector<std::string> train_cells;
  std::vector<std::string> test_cells;
};

struct Checkpoint {
  NestedModel<float> model;
  CheckpointInfo info;
};

/// JSON document with the feature spec, scaler, hyperparameters and each
/// weight tensor as base64 of little-endian binary32 in row-major order.
std::string serialize_checkpoint(const NestedModel<float>& model, const CheckpointInfo& info = {});

/// VersionError for an unknown format_version; IntegrityError for malformed
/// JSON, missing tensors, or payloads whose length disagrees with the shape.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const NestedModel<float>& model, const std::filesystem::path& path,
                     const CheckpointInfo& info = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string base64_encode(std::span<const unsigned char> bytes);
/// std::nullopt on characters outside the alphabet or bad padding.
std::optional<std::vector<unsigned char>> base64_decode(std::string_view text);

} // namespace secs

#endif // SECS_CHECKPOINT_HPP
