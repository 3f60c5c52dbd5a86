#include "secs/checkpoint.hpp"

#include "secs/error.hpp"
#include "secs/io.hpp"
#include "secs/json_convert.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <ostream>

namespace secs {
namespace {

constexpr const char* kModule = "checkpoint";
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

using nlohmann::json;

std::string encode_tensor(const MatrixX<float>& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(m(i, j));
      for (int k = 0; k < 4; ++k)
        bytes.push_back(static_cast<unsigned char>(bits >> (8 * k)));
    }
  return base64_encode(bytes);
}

MatrixX<float> decode_tensor(const json& entry, const std::string& name, Eigen::Index rows,
                             Eigen::Index cols) {
  if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data"))
    throw IntegrityError(kModule, "tensor '" + name + "' lacks shape or data");
  const auto shape = entry.at("shape").get<std::vector<long long>>();
  if (shape.size() != 2 || shape[0] != rows || shape[1] != cols)
    throw IntegrityError(kModule, "tensor '" + name + "' has shape inconsistent with the model (expected " +
                                      std::to_string(rows) + "x" + std::to_string(cols) + ")");
  const auto bytes = base64_decode(entry.at("data").get<std::string>());
  if (!bytes)
    throw IntegrityError(kModule, "tensor '" + name + "' payload is not valid base64");
  if (bytes->size() != static_cast<std::size_t>(rows * cols) * 4)
    throw IntegrityError(kModule, "tensor '" + name + "' payload holds " + std::to_string(bytes->size()) +
                                      " bytes, expected " + std::to_string(rows * cols * 4));
  MatrixX<float> m(rows, cols);
  std::size_t off = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k)
        bits |= std::uint32_t((*bytes)[off++]) << (8 * k);
      m(i, j) = std::bit_cast<float>(bits);
    }
  return m;
}

} // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size())
      v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::optional<std::vector<unsigned char>> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0)
    return std::nullopt;
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int k = 0; k < 64; ++k)
    lookup[static_cast<unsigned char>(kAlphabet[k])] = k;
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && last && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0)
        return std::nullopt;
      const int d = lookup[static_cast<unsigned char>(c)];
      if (d < 0)
        return std::nullopt;
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(static_cast<unsigned char>(v >> 16));
    if (pad < 2)
      out.push_back(static_cast<unsigned char>(v >> 8));
    if (pad < 1)
      out.push_back(static_cast<unsigned char>(v));
  }
  return out;
}

std::string serialize_checkpoint(const NestedModel<float>& model, const CheckpointInfo& info) {
  model.validate();
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["spec"] = to_json(model.spec);
  doc["scaler"] = {{"feature_mean", std::vector<double>(model.scaler.feature_mean.data(),
                                                        model.scaler.feature_mean.data() +
                                                            model.scaler.feature_mean.size())},
                   {"feature_sd", std::vector<double>(model.scaler.feature_sd.data(),
                                                      model.scaler.feature_sd.data() +
                                                          model.scaler.feature_sd.size())},
                   {"target_scale", model.scaler.target_scale}};
  json hyper = {{"hidden", model.hidden_dim()},
                {"dropout_rate", model.dropout_rate},
                {"crop", info.crop},
                {"train_cells", info.train_cells},
                {"test_cells", info.test_cells}};
  if (info.train)
    hyper["train"] = to_json(*info.train);
  doc["hyper"] = std::move(hyper);
  json weights = json::object();
  const auto& names = NestedParams<float>::tensor_names();
  const auto tensors = model.params.tensors();
  for (std::size_t k = 0; k < names.size(); ++k)
    weights[names[k]] = {{"shape", {tensors[k]->rows(), tensors[k]->cols()}},
                         {"data", encode_tensor(*tensors[k])}};
  doc["weights"] = std::move(weights);
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IntegrityError(kModule, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version"))
    throw IntegrityError(kModule, "checkpoint lacks format_version");
  if (!doc["format_version"].is_number_integer() ||
      doc["format_version"].get<long long>() != kCheckpointFormatVersion)
    throw VersionError(kModule, "unsupported checkpoint format_version " +
                                    doc["format_version"].dump() + "; supported versions: " +
                                    std::to_string(kCheckpointFormatVersion));
  Checkpoint cp;
  try {
    for (const char* key : {"spec", "scaler", "hyper", "weights"})
      if (!doc.contains(key) || !doc[key].is_object())
        throw IntegrityError(kModule, std::string("checkpoint lacks the '") + key + "' object");
    read_json(doc["spec"], cp.model.spec);
    cp.model.spec.validate();
    const json& hyper = doc["hyper"];
    const int hidden = hyper.at("hidden").get<int>();
    if (hidden < 1)
      throw IntegrityError(kModule, "hidden size must be >= 1");
    cp.model.dropout_rate = hyper.at("dropout_rate").get<double>();
    cp.info.crop = hyper.value("crop", std::string());
    cp.info.train_cells = hyper.value("train_cells", std::vector<std::string>());
    cp.info.test_cells = hyper.value("test_cells", std::vector<std::string>());
    if (hyper.contains("train")) {
      TrainConfig tc;
      read_json(hyper["train"], tc);
      cp.info.train = tc;
    }

    const json& scaler = doc["scaler"];
    const auto mean = scaler.at("feature_mean").get<std::vector<double>>();
    const auto sd = scaler.at("feature_sd").get<std::vector<double>>();
    const int F = cp.model.spec.n_features();
    if (static_cast<int>(mean.size()) != F || static_cast<int>(sd.size()) != F)
      throw IntegrityError(kModule, "scaler width does not match the feature spec");
    cp.model.scaler.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), F);
    cp.model.scaler.feature_sd = Eigen::Map<const Eigen::VectorXd>(sd.data(), F);
    cp.model.scaler.target_scale = scaler.at("target_scale").get<double>();

    const int L = cp.model.spec.batch_len;
    const json& weights = doc["weights"];
    const auto& names = NestedParams<float>::tensor_names();
    const std::array<std::pair<Eigen::Index, Eigen::Index>, 8> shapes = {{
        {4 * hidden, F}, {4 * hidden, hidden}, {4 * hidden, 1},
        {4 * hidden, hidden}, {4 * hidden, hidden}, {4 * hidden, 1},
        {L, hidden}, {L, 1}}};
    auto tensors = cp.model.params.tensors();
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!weights.contains(names[k]))
        throw IntegrityError(kModule, "checkpoint lacks tensor '" + names[k] + "'");
      *tensors[k] = decode_tensor(weights[names[k]], names[k], shapes[k].first, shapes[k].second);
    }
    if (weights.size() != names.size())
      throw IntegrityError(kModule, "checkpoint holds unexpected tensors");
    cp.model.validate();
  } catch (const json::exception& e) {
    throw IntegrityError(kModule, std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(kModule, std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw IntegrityError(kModule, std::string("malformed checkpoint: ") + e.what());
  } catch (const NumericError& e) {
    throw IntegrityError(kModule, std::string("malformed checkpoint: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const NestedModel<float>& model, const std::filesystem::path& path,
                     const CheckpointInfo& info) {
  const std::string text = serialize_checkpoint(model, info);
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw IoError(kModule, "checkpoint not found: '" + path.string() + "'");
  return parse_checkpoint(read_text_file(path));
}

} // namespace secs
