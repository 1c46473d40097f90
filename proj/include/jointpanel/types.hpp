#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace jointpanel {

// The two longitudinal outcomes. The numeric value is the index used in every
// per-channel Eigen::Vector2d of a ParameterState.
enum class Channel : int { Industrial = 0, Artisanal = 1 };

inline constexpr std::array<Channel, 2> kChannels{Channel::Industrial, Channel::Artisanal};

constexpr int index(Channel c) { return static_cast<int>(c); }

constexpr std::string_view suffix(Channel c) { return c == Channel::Industrial ? "I" : "A"; }

struct Observation {
  int t = 0;
  std::array<std::optional<double>, 2> y;  // log-tonnes, indexed by Channel

  const std::optional<double>& operator[](Channel c) const { return y[index(c)]; }
  std::optional<double>& operator[](Channel c) { return y[index(c)]; }

  bool operator==(const Observation&) const = default;
};

struct GroupSeries {
  std::string id;
  std::vector<Observation> obs;  // strictly increasing t

  bool operator==(const GroupSeries&) const = default;
};

struct PanelDataset {
  std::vector<GroupSeries> groups;
  int t0_label = 0;  // calendar year of t = 0, metadata only

  std::size_t n_groups() const { return groups.size(); }
  std::size_t n_observed(Channel c) const;
  std::vector<std::string> group_ids() const;

  bool operator==(const PanelDataset&) const = default;
};

// Content hash (FNV-1a 64, hex) over group ids, t values and the exact bits of
// every observation. Independent of platform and of t0_label formatting.
std::string fingerprint(const PanelDataset& data);

// Throws DataError unless: >= 1 group, each grid non-empty, t >= 0 and
// strictly increasing within every group.
void validate(const PanelDataset& data);

enum class ModelKind { M1, M2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct HyperPriors {
  double beta_mean = 0.0;
  double beta_sd = 100.0;
  double sd_upper = 100.0;  // every standard deviation is Uniform(0, sd_upper)
};

struct ModelSpec {
  ModelKind kind = ModelKind::M1;
  HyperPriors priors;

  bool has_ar() const { return kind == ModelKind::M2; }
};

// b_i = (b0_I, b0_A, b1_I, b1_A)
using RandomEffects = Eigen::Vector4d;

inline constexpr int kInterceptRow = 0;
inline constexpr int kSlopeRow = 2;

constexpr int intercept_index(Channel c) { return kInterceptRow + index(c); }
constexpr int slope_index(Channel c) { return kSlopeRow + index(c); }

// One point in parameter space. Per-channel quantities are Vector2d indexed by
// Channel. `ar` holds (rho_I, rho_A) and is engaged only for M2.
struct ParameterState {
  Eigen::Vector2d beta0 = Eigen::Vector2d::Zero();
  std::optional<Eigen::Vector2d> ar;
  double sigma = 1.0;
  Eigen::Vector2d sigma0 = Eigen::Vector2d::Ones();
  Eigen::Vector2d sigma1 = Eigen::Vector2d::Ones();
  double rho0 = 0.0;
  double rho1 = 0.0;
  std::vector<RandomEffects> b;

  double ar_coefficient(Channel c) const { return ar ? (*ar)[index(c)] : 0.0; }

  bool operator==(const ParameterState& other) const;
};

// Flat scalar view of a state, in the column order used by draw files and
// summary tables. Random effects come last, group-major.
std::vector<std::string> parameter_names(const ModelSpec& spec,
                                         const std::vector<std::string>& group_ids);
Eigen::VectorXd flatten(const ModelSpec& spec, const ParameterState& state);
ParameterState unflatten(const ModelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& values,
                         std::size_t n_groups);

}  // namespace jointpanel
