#include "jointpanel/types.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>

#include "jointpanel/errors.hpp"

namespace jointpanel {

std::size_t PanelDataset::n_observed(Channel c) const {
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& o : g.obs) n += o[c].has_value();
  return n;
}

std::vector<std::string> PanelDataset::group_ids() const {
  std::vector<std::string> ids;
  ids.reserve(groups.size());
  for (const auto& g : groups) ids.push_back(g.id);
  return ids;
}

void validate(const PanelDataset& data) {
  if (data.groups.empty()) throw DataError("dataset has no groups");
  for (const auto& g : data.groups) {
    if (g.obs.empty()) throw DataError("group '" + g.id + "' has an empty observation grid");
    int prev = -1;
    for (const auto& o : g.obs) {
      if (o.t < 0) throw DataError("group '" + g.id + "' has a negative time index");
      if (o.t <= prev) throw DataError("group '" + g.id + "' time indices are not strictly increasing");
      prev = o.t;
    }
  }
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::M1 ? "M1" : "M2"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "m1" || text == "M1") return ModelKind::M1;
  if (text == "m2" || text == "M2") return ModelKind::M2;
  throw DataError("unknown model '" + std::string(text) + "' (expected m1 or m2)");
}

bool ParameterState::operator==(const ParameterState& other) const {
  if (beta0 != other.beta0 || sigma != other.sigma || sigma0 != other.sigma0 || sigma1 != other.sigma1 ||
      rho0 != other.rho0 || rho1 != other.rho1 || ar.has_value() != other.ar.has_value() ||
      b.size() != other.b.size())
    return false;
  if (ar && *ar != *other.ar) return false;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i] != other.b[i]) return false;
  return true;
}

namespace {

std::size_t n_global(const ModelSpec& spec) { return spec.has_ar() ? 11 : 9; }

}  // namespace

std::vector<std::string> parameter_names(const ModelSpec& spec, const std::vector<std::string>& group_ids) {
  std::vector<std::string> names{"beta0_I", "beta0_A"};
  if (spec.has_ar()) {
    names.emplace_back("rho_I");
    names.emplace_back("rho_A");
  }
  for (const char* n : {"sigma", "sigma0_I", "sigma0_A", "sigma1_I", "sigma1_A", "rho0", "rho1"})
    names.emplace_back(n);
  for (const auto& id : group_ids)
    for (const char* n : {"b0_I", "b0_A", "b1_I", "b1_A"}) names.push_back(std::string(n) + "[" + id + "]");
  return names;
}

Eigen::VectorXd flatten(const ModelSpec& spec, const ParameterState& state) {
  Eigen::VectorXd v(n_global(spec) + 4 * state.b.size());
  Eigen::Index k = 0;
  v[k++] = state.beta0[0];
  v[k++] = state.beta0[1];
  if (spec.has_ar()) {
    v[k++] = state.ar_coefficient(Channel::Industrial);
    v[k++] = state.ar_coefficient(Channel::Artisanal);
  }
  v[k++] = state.sigma;
  v[k++] = state.sigma0[0];
  v[k++] = state.sigma0[1];
  v[k++] = state.sigma1[0];
  v[k++] = state.sigma1[1];
  v[k++] = state.rho0;
  v[k++] = state.rho1;
  for (const auto& bi : state.b) {
    v.segment<4>(k) = bi;
    k += 4;
  }
  return v;
}

ParameterState unflatten(const ModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& values,
                         std::size_t n_groups) {
  if (static_cast<std::size_t>(values.size()) != n_global(spec) + 4 * n_groups)
    throw DataError("parameter vector has " + std::to_string(values.size()) + " entries, expected " +
                    std::to_string(n_global(spec) + 4 * n_groups));
  ParameterState s;
  Eigen::Index k = 0;
  s.beta0 = values.segment<2>(k);
  k += 2;
  if (spec.has_ar()) {
    s.ar = Eigen::Vector2d(values.segment<2>(k));
    k += 2;
  }
  s.sigma = values[k++];
  s.sigma0 = values.segment<2>(k);
  k += 2;
  s.sigma1 = values.segment<2>(k);
  k += 2;
  s.rho0 = values[k++];
  s.rho1 = values[k++];
  s.b.resize(n_groups);
  for (auto& bi : s.b) {
    bi = values.segment<4>(k);
    k += 4;
  }
  return s;
}

}  // namespace jointpanel

namespace jointpanel {

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  // Little-endian regardless of host byte order.
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::string fingerprint(const PanelDataset& data) {
  Fnv1a h;
  h.u64(data.groups.size());
  for (const auto& g : data.groups) {
    h.u64(g.id.size());
    h.bytes(g.id.data(), g.id.size());
    h.u64(g.obs.size());
    for (const auto& o : g.obs) {
      h.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(o.t)));
      for (Channel c : kChannels) {
        h.u64(o[c].has_value());
        h.u64(o[c] ? std::bit_cast<std::uint64_t>(*o[c]) : 0);
      }
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h.value()));
  return out;
}

}  // namespace jointpanel
