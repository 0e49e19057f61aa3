#include "probekit/direction.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "probekit/errors.hpp"

namespace probekit {

namespace {
constexpr std::string_view kDirectionMagic = "RQPD";
constexpr std::uint32_t kDirectionVersion = 1;
}  // namespace

std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::diffmean: return "diffmean";
    case ProbeKind::logistic: return "logistic";
    case ProbeKind::hinge: return "hinge";
  }
  return "?";
}

std::string_view to_string(SpaceKind space) {
  return space == SpaceKind::pca ? "pca" : "embedding";
}

ProbeKind parse_probe_kind(std::string_view text) {
  if (text == "diffmean") return ProbeKind::diffmean;
  if (text == "logistic") return ProbeKind::logistic;
  if (text == "hinge") return ProbeKind::hinge;
  throw InvariantError("unknown probe kind '" + std::string(text) + "'");
}

void ProbeDirection::validate() const {
  if (w.size() == 0) throw InvariantError("direction: empty weight vector");
  if (!w.allFinite() || !std::isfinite(bias)) {
    throw InvariantError("direction: non-finite weights or bias");
  }
}

ProbeDirection ProbeDirection::negated() const {
  ProbeDirection out = *this;
  out.w = -w;
  out.bias = -bias;
  return out;
}

nlohmann::json direction_descriptor(const ProbeDirection& dir) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(dir.kind));
  j["layer"] = dir.layer;
  j["space"] = std::string(to_string(dir.space));
  j["dim"] = dir.dim();
  j["setting"] = dir.source_setting;
  j["bias"] = dir.bias;
  nlohmann::ordered_json cfg;
  cfg["l2_lambda"] = dir.info.l2_lambda;
  cfg["iterations"] = dir.info.iterations;
  cfg["selected_iteration"] = dir.info.selected_iteration;
  cfg["converged"] = dir.info.converged;
  cfg["flipped"] = dir.info.flipped;
  cfg["seed"] = dir.info.seed;
  j["config"] = cfg;
  if (dir.info.validation_auroc) {
    j["validation_auroc"] = *dir.info.validation_auroc;
  } else {
    j["validation_auroc"] = nullptr;
  }
  return j;
}

void save_direction(const std::string& path, const ProbeDirection& dir) {
  dir.validate();
  detail::ByteWriter w;
  w.put_bytes(kDirectionMagic);
  w.put<std::uint32_t>(kDirectionVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dir.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dir.space));
  w.put<std::uint32_t>(dir.layer);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(dir.dim()));
  w.put<double>(dir.bias);
  w.put_array(dir.w.data(), static_cast<std::size_t>(dir.dim()));
  detail::write_file_bytes(path, w.bytes());
  detail::write_text_file(path + ".json", direction_descriptor(dir).dump(2) + "\n");
}

ProbeDirection load_direction(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, path);
  if (r.take_bytes(4) != kDirectionMagic) throw BadMagicError(path + ": bad magic (expected RQPD)");
  const auto version = r.get<std::uint32_t>();
  if (version != kDirectionVersion) {
    throw UnsupportedVersionError(path + ": unsupported version " + std::to_string(version));
  }
  ProbeDirection dir;
  const auto kind = r.get<std::uint32_t>();
  const auto space = r.get<std::uint32_t>();
  if (kind > 2 || space > 1) throw FormatError(path + ": bad kind/space field");
  dir.kind = static_cast<ProbeKind>(kind);
  dir.space = static_cast<SpaceKind>(space);
  dir.layer = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint64_t>();
  dir.bias = r.get<double>();
  r.expect(dim, sizeof(double));
  dir.w.resize(static_cast<Eigen::Index>(dim));
  r.get_array(dir.w.data(), dim);
  if (r.remaining() != 0) throw FormatError(path + ": trailing bytes");

  // The descriptor is optional on load; it only carries provenance.
  try {
    const auto j = nlohmann::json::parse(detail::read_text_file(path + ".json"));
    dir.source_setting = j.value("setting", "");
    if (j.contains("config")) {
      const auto& c = j["config"];
      dir.info.l2_lambda = c.value("l2_lambda", 0.0);
      dir.info.iterations = c.value("iterations", 0u);
      dir.info.selected_iteration = c.value("selected_iteration", 0u);
      dir.info.converged = c.value("converged", true);
      dir.info.flipped = c.value("flipped", false);
      dir.info.seed = c.value("seed", std::uint64_t{0});
    }
    if (j.contains("validation_auroc") && j["validation_auroc"].is_number()) {
      dir.info.validation_auroc = j["validation_auroc"].get<double>();
    }
  } catch (const NotFoundError&) {
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ".json: " + e.what());
  }
  dir.validate();
  return dir;
}

}  // namespace probekit
