#ifndef GRIDPRICE_SCENARIO_HPP
#define GRIDPRICE_SCENARIO_HPP

// Scenario construction and JSON persistence.
//
// Random streams are std::mt19937_64 (fully specified by the C++ standard)
// and every draw is converted to [0, 1) as (word >> 11) * 2^-53, so the same
// seed yields the same scenario on any platform:
//   - willingness: stream seeded with `seed`, one draw per user in order;
//   - solar jitter: stream seeded with `seed ^ kSolarStreamSalt`, one draw per
//     (user, period) pair in user-major order, including zero periods.

#include "gridprice/consumer.hpp"
#include "gridprice/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gridprice {

inline constexpr int kScenarioVersion = 1;
inline constexpr std::uint64_t kReferenceSeed = 42;
inline constexpr std::size_t kReferenceUsers = 20;
inline constexpr double kReferenceAlpha = 2.0;
inline constexpr double kReferenceBasePrice = 1.0;
inline constexpr double kNetMeteringBasePrice = 2.0;
inline constexpr double kReferencePriceCap = 10.0;
inline constexpr double kDefaultSolarJitter = 0.1;
inline constexpr std::uint64_t kSolarStreamSalt = 0x9E3779B97F4A7C15ULL;

/// Inelastic demand per 4-hour period, starting at midnight.
inline const std::vector<double> &reference_inelastic_demand() {
  static const std::vector<double> m{0.16, 0.39, 0.63, 0.51, 0.78, 0.52};
  return m;
}

/// Generation shape: nothing at night, a little at dawn and dusk, a lot midday.
inline const std::vector<double> &default_solar_profile() {
  static const std::vector<double> s{0.0, 0.3, 1.6, 1.8, 0.4, 0.0};
  return s;
}

struct Scenario {
  std::string label;
  std::uint64_t seed = 0;
  std::size_t n_users = 0;
  std::size_t n_periods = 0;
  double p_b = kReferenceBasePrice;
  double price_cap = kReferencePriceCap;
  std::vector<ConsumerProfile> consumers;

  bool operator==(const Scenario &) const = default;

  bool has_solar() const {
    for (const auto &c : consumers)
      for (double v : c.s)
        if (v != 0.0)
          return true;
    return false;
  }
};

/// Column view of one period: everything a retailer problem needs.
struct PeriodData {
  std::vector<double> omega;
  std::vector<double> alpha;
  std::vector<double> m;
  std::vector<double> s;

  std::size_t size() const { return omega.size(); }
};

namespace scenario {

inline double unit_draw(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void validate(const Scenario &sc) {
  auto fail = [](const std::string &what) {
    throw Error(ErrorCode::InvalidArgument, what);
  };
  if (sc.consumers.size() != sc.n_users)
    fail("consumer count differs from n_users");
  if (!(sc.p_b >= 0))
    fail("base price must be nonnegative");
  if (!(sc.price_cap > sc.p_b))
    fail("price cap must exceed the base price");
  for (std::size_t i = 0; i < sc.consumers.size(); ++i) {
    const auto &c = sc.consumers[i];
    const std::string at = "consumers[" + std::to_string(i) + "]";
    if (!(c.alpha > 0))
      fail(at + ".alpha must be positive");
    if (c.omega.size() != sc.n_periods || c.m.size() != sc.n_periods ||
        c.s.size() != sc.n_periods)
      fail(at + " vectors must have n_periods entries");
    for (std::size_t k = 0; k < sc.n_periods; ++k)
      if (!(c.omega[k] >= 0) || !(c.m[k] >= 0) || !(c.s[k] >= 0))
        fail(at + " has a negative omega, m or s entry");
  }
}

/// Willingness omega_i ~ U[3, 7]; per-period omega_i^k = 0.75 omega_i + 0.5 m_k.
inline Scenario generate_reference(std::uint64_t seed, std::size_t n_users,
                                   double base_price = kReferenceBasePrice) {
  if (n_users == 0)
    throw Error(ErrorCode::InvalidArgument, "n_users must be at least 1");
  const auto &m = reference_inelastic_demand();
  Scenario sc;
  sc.label = "reference";
  sc.seed = seed;
  sc.n_users = n_users;
  sc.n_periods = m.size();
  sc.p_b = base_price;
  sc.price_cap = kReferencePriceCap;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_users; ++i) {
    const double base = 3.0 + 4.0 * unit_draw(rng);
    ConsumerProfile c;
    c.alpha = kReferenceAlpha;
    c.m = m;
    c.s.assign(m.size(), 0.0);
    for (double mk : m)
      c.omega.push_back(0.75 * base + 0.5 * mk);
    sc.consumers.push_back(std::move(c));
  }
  validate(sc);
  return sc;
}

/// s_i^k = scale * profile[k] * (1 + jitter * (2u - 1)). The first and last
/// periods are night-time and must carry zero generation.
inline Scenario attach_solar(const Scenario &in, const std::vector<double> &profile,
                             double scale, double jitter = kDefaultSolarJitter) {
  if (profile.size() != in.n_periods)
    throw Error(ErrorCode::DimensionMismatch, "solar profile length differs from n_periods");
  if (in.n_periods > 0 && (profile.front() != 0.0 || profile.back() != 0.0))
    throw Error(ErrorCode::NonzeroNightSolar,
                "first and last periods must have zero generation");
  if (!(scale >= 0) || !(jitter >= 0) || jitter > 1)
    throw Error(ErrorCode::InvalidArgument, "scale must be >= 0 and jitter in [0, 1]");
  Scenario out = in;
  std::mt19937_64 rng(in.seed ^ kSolarStreamSalt);
  for (auto &c : out.consumers) {
    for (std::size_t k = 0; k < out.n_periods; ++k) {
      const double u = unit_draw(rng);
      c.s[k] = scale * profile[k] * (1.0 + jitter * (2.0 * u - 1.0));
    }
  }
  return out;
}

inline PeriodData period_data(const Scenario &sc, std::size_t k) {
  if (k >= sc.n_periods)
    throw Error(ErrorCode::InvalidArgument,
                "period " + std::to_string(k + 1) + " out of range");
  PeriodData d;
  for (const auto &c : sc.consumers) {
    d.omega.push_back(c.omega[k]);
    d.alpha.push_back(c.alpha);
    d.m.push_back(c.m[k]);
    d.s.push_back(c.s[k]);
  }
  return d;
}

inline nlohmann::json to_json(const Scenario &sc) {
  nlohmann::json j;
  j["version"] = kScenarioVersion;
  j["label"] = sc.label;
  j["seed"] = sc.seed;
  j["n_users"] = sc.n_users;
  j["n_periods"] = sc.n_periods;
  j["p_b"] = sc.p_b;
  j["P_cap"] = sc.price_cap;
  j["consumers"] = nlohmann::json::array();
  for (const auto &c : sc.consumers)
    j["consumers"].push_back(
        {{"alpha", c.alpha}, {"omega", c.omega}, {"m", c.m}, {"s", c.s}});
  return j;
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string &path, const std::string &what) {
  throw Error(ErrorCode::SchemaViolation, path + ": " + what);
}

inline void check_keys(const nlohmann::json &obj, const std::string &path,
                       const std::set<std::string> &allowed) {
  if (!obj.is_object())
    schema_error(path.empty() ? "$" : path, "expected an object");
  for (const auto &name : allowed)
    if (!obj.contains(name))
      schema_error(path.empty() ? name : path + "." + name, "missing required field");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      schema_error(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
}

inline double number(const nlohmann::json &v, const std::string &path) {
  if (!v.is_number())
    schema_error(path, "expected a number");
  return v.get<double>();
}

inline std::vector<double> numbers(const nlohmann::json &v, const std::string &path,
                                   std::size_t expected) {
  if (!v.is_array())
    schema_error(path, "expected an array of numbers");
  if (v.size() != expected)
    schema_error(path, "expected " + std::to_string(expected) + " entries");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::uint64_t count(const nlohmann::json &v, const std::string &path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    schema_error(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

} // namespace detail

/// Throws SchemaViolation naming the offending field path.
inline Scenario from_json(const nlohmann::json &j) {
  using namespace detail;
  check_keys(j, "", {"version", "label", "seed", "n_users", "n_periods", "p_b", "P_cap",
                     "consumers"});
  if (count(j["version"], "version") != kScenarioVersion)
    schema_error("version", "unsupported version");
  if (!j["label"].is_string())
    schema_error("label", "expected a string");
  Scenario sc;
  sc.label = j["label"].get<std::string>();
  sc.seed = count(j["seed"], "seed");
  sc.n_users = count(j["n_users"], "n_users");
  sc.n_periods = count(j["n_periods"], "n_periods");
  sc.p_b = number(j["p_b"], "p_b");
  sc.price_cap = number(j["P_cap"], "P_cap");
  const auto &cs = j["consumers"];
  if (!cs.is_array())
    schema_error("consumers", "expected an array");
  if (cs.size() != sc.n_users)
    schema_error("consumers", "expected n_users entries");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::string at = "consumers[" + std::to_string(i) + "]";
    check_keys(cs[i], at, {"alpha", "omega", "m", "s"});
    ConsumerProfile c;
    c.alpha = number(cs[i]["alpha"], at + ".alpha");
    if (!(c.alpha > 0))
      schema_error(at + ".alpha", "must be positive");
    c.omega = numbers(cs[i]["omega"], at + ".omega", sc.n_periods);
    c.m = numbers(cs[i]["m"], at + ".m", sc.n_periods);
    c.s = numbers(cs[i]["s"], at + ".s", sc.n_periods);
    sc.consumers.push_back(std::move(c));
  }
  try {
    validate(sc);
  } catch (const Error &e) {
    schema_error("$", e.what());
  }
  return sc;
}

inline void save(const Scenario &sc, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << to_json(sc).dump(2) << '\n';
  if (!out)
    throw Error(ErrorCode::IoError, "failed writing " + path);
}

inline Scenario load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::SchemaViolation, path + ": malformed JSON: " + e.what());
  }
  return from_json(j);
}

} // namespace scenario
} // namespace gridprice

#endif
