#include "risisac/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "risisac/errors.hpp"

namespace risisac {

namespace {

constexpr double kLaplaceSpreadRad = 5.0 * M_PI / 180.0;

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

double clamp_azimuth(double eta) { return std::clamp(eta, 0.0, M_PI); }
double clamp_elevation(double phi) { return std::clamp(phi, -M_PI / 2.0, M_PI / 2.0); }

}  // namespace

Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double eta, double phi,
                                 ArrayPlane plane) {
  if (!std::isfinite(eta) || !std::isfinite(phi))
    throw InvalidInput("steering_vector: non-finite angle");
  if (geom.rows < 1 || geom.cols < 1)
    throw InvalidInput("steering_vector: array dimensions must be positive");
  if (geom.wavelength <= 0.0)
    throw InvalidInput("steering_vector: wavelength must be positive");

  const double c_eta = (plane == ArrayPlane::yz) ? std::sin(eta) : std::cos(eta);
  const double horiz = c_eta * std::sin(phi) * geom.dy;
  const double vert = std::cos(phi) * geom.dz;
  const double k = 2.0 * M_PI / geom.wavelength;
  const double scale = 1.0 / std::sqrt(static_cast<double>(geom.rows) * geom.cols);

  Eigen::VectorXcd v(geom.rows * geom.cols);
  for (int iy = 0; iy < geom.rows; ++iy) {
    for (int iz = 0; iz < geom.cols; ++iz) {
      const double phase = -k * (iy * horiz + iz * vert);
      v(iy * geom.cols + iz) = scale * std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }
  return v;
}

double path_loss_db(double distance_m, bool line_of_sight, double shadow_db) {
  if (!(distance_m > 0.0)) throw InvalidInput("path_loss_db: distance must be positive");
  const double a = line_of_sight ? 61.4 : 72.0;
  const double b = line_of_sight ? 2.0 : 2.92;
  return a + 10.0 * b * std::log10(distance_m) + shadow_db;
}

double shadowing_std_db(bool line_of_sight) { return line_of_sight ? 5.8 : 8.7; }

std::complex<double> SystemConfig::resolved_alpha() const {
  if (!alpha_auto) return alpha;
  const double round_trip_db = 2.0 * path_loss_db(ris_target_distance, true);
  return {std::pow(10.0, -round_trip_db / 20.0), 0.0};
}

void SystemConfig::validate() const {
  require(n_tx >= 1 && n_tz >= 1, "transmit array dimensions must be positive");
  require(m_y >= 1 && m_z >= 1, "reflecting array dimensions must be positive");
  require(m_sy >= 1 && m_sz >= 1, "sensing array dimensions must be positive");
  require(n_rf >= 1 && n_rf <= n_t(), "need 1 <= n_rf <= n_t");
  require(n_s >= 1 && n_s <= n_rf, "need 1 <= n_s <= n_rf");
  require(k_users >= 0 && k_users <= n_s, "need 0 <= k_users <= n_s");
  require(carrier_freq > 0.0, "carrier_freq must be positive");
  require(d0 > 0.0 && dr > 0.0 && dy > 0.0 && dz > 0.0, "element spacings must be positive");
  require(p0 > 0.0, "p0 must be positive");
  require(r_th >= 0.0, "r_th must be nonnegative");
  require(sigma0_sq > 0.0 && sigmar_sq > 0.0, "noise powers must be positive");
  require(t_snapshots >= 1, "t_snapshots must be positive");
  require(std::isfinite(target_eta) && target_eta >= 0.0 && target_eta <= M_PI,
          "target_eta must lie in [0, pi]");
  require(std::isfinite(target_phi) && std::abs(target_phi) <= M_PI / 2.0,
          "target_phi must lie in [-pi/2, pi/2]");
  require(ris_target_distance > 0.0, "ris_target_distance must be positive");
  require(n_cl >= 1 && n_ray >= 1, "n_cl and n_ray must be positive");
  require(bs_ris_distance > 0.0, "bs_ris_distance must be positive");
  require(static_cast<int>(ris_user_distances.size()) == k_users,
          "ris_user_distances must list one distance per user");
  for (double d : ris_user_distances)
    require(d > 0.0, "ris_user_distances entries must be positive");
  const std::complex<double> a = resolved_alpha();
  require(std::isfinite(a.real()) && std::isfinite(a.imag()), "alpha must be finite");
}

PathSet draw_paths(const SystemConfig& cfg, double distance_m, bool with_departure,
                   RandomStream& stream) {
  PathSet out;
  out.rays.reserve(static_cast<std::size_t>(cfg.n_cl) * cfg.n_ray);
  for (int cl = 0; cl < cfg.n_cl; ++cl) {
    const bool los = (cl == 0);
    const double shadow =
        (cfg.shadowing_mode == ShadowingMode::gaussian)
            ? shadowing_std_db(los) * stream.normal()
            : 0.0;
    const double pl_db = path_loss_db(distance_m, los, shadow);
    const double gain_std = std::sqrt(std::pow(10.0, -0.1 * pl_db));

    const double eta_r_c = stream.uniform(0.0, M_PI);
    const double phi_r_c = stream.uniform(-M_PI / 2.0, M_PI / 2.0);
    const double eta_t_c = stream.uniform(0.0, M_PI);
    const double phi_t_c = stream.uniform(-M_PI / 2.0, M_PI / 2.0);

    for (int ray = 0; ray < cfg.n_ray; ++ray) {
      RayPath p;
      p.los = los;
      p.eta_r = clamp_azimuth(stream.laplace(eta_r_c, kLaplaceSpreadRad));
      p.phi_r = clamp_elevation(stream.laplace(phi_r_c, kLaplaceSpreadRad));
      if (with_departure) {
        p.eta_t = clamp_azimuth(stream.laplace(eta_t_c, kLaplaceSpreadRad));
        p.phi_t = clamp_elevation(stream.laplace(phi_t_c, kLaplaceSpreadRad));
      }
      p.gain = gain_std * stream.complex_normal();
      out.rays.push_back(p);
    }
  }
  return out;
}

Eigen::MatrixXcd assemble_bs_ris_channel(const SystemConfig& cfg, const PathSet& paths) {
  const int m = cfg.m_reflect();
  const int nt = cfg.n_t();
  const double norm = std::sqrt(static_cast<double>(nt) * m /
                                (static_cast<double>(cfg.n_cl) * cfg.n_ray));
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, nt);
  for (const RayPath& p : paths.rays) {
    const Eigen::VectorXcd ar = steering_vector(cfg.ris_geometry(), p.eta_r, p.phi_r);
    const Eigen::VectorXcd at =
        steering_vector(cfg.tx_geometry(), p.eta_t, p.phi_t, ArrayPlane::xz);
    h.noalias() += p.gain * ar * at.adjoint();
  }
  return norm * h;
}

Eigen::VectorXcd assemble_user_channel(const SystemConfig& cfg, const PathSet& paths) {
  const int m = cfg.m_reflect();
  const double norm =
      std::sqrt(static_cast<double>(m) / (static_cast<double>(cfg.n_cl) * cfg.n_ray));
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m);
  for (const RayPath& p : paths.rays)
    g.noalias() += p.gain * steering_vector(cfg.ris_geometry(), p.eta_r, p.phi_r);
  return norm * g;
}

ChannelSet generate_channels(const SystemConfig& cfg) {
  cfg.validate();
  ChannelSet out;
  {
    RandomStream stream(cfg.rng_seed, "channel.bs_ris");
    out.h_paths = draw_paths(cfg, cfg.bs_ris_distance, true, stream);
    out.h = assemble_bs_ris_channel(cfg, out.h_paths);
  }
  out.g.resize(cfg.k_users);
  out.g_paths.resize(cfg.k_users);
  for (int k = 0; k < cfg.k_users; ++k) {
    RandomStream stream(cfg.rng_seed, "channel.user", static_cast<std::uint64_t>(k));
    out.g_paths[k] = draw_paths(cfg, cfg.ris_user_distances[k], false, stream);
    out.g[k] = assemble_user_channel(cfg, out.g_paths[k]);
  }
  return out;
}

namespace {

struct FieldParser {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  template <typename T>
  void get(const std::string& key, T& target) {
    auto it = values.find(key);
    if (it == values.end()) return;
    std::istringstream stream(it->second);
    T parsed{};
    if (!(stream >> parsed)) throw InvalidInput("scenario: bad value for key '" + key + "'");
    std::string rest;
    if (stream >> rest) throw InvalidInput("scenario: trailing text for key '" + key + "'");
    target = parsed;
    values.erase(it);
  }

  void get_list(const std::string& key, std::vector<double>& target) {
    auto it = values.find(key);
    if (it == values.end()) return;
    std::istringstream stream(it->second);
    std::vector<double> parsed;
    double v;
    while (stream >> v) parsed.push_back(v);
    if (!stream.eof()) throw InvalidInput("scenario: bad list for key '" + key + "'");
    target = std::move(parsed);
    values.erase(it);
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SystemConfig load_scenario(std::istream& in) {
  FieldParser fields;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("scenario: line " + std::to_string(line_no) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InvalidInput("scenario: empty key or value on line " + std::to_string(line_no));
    if (fields.values.count(key))
      throw InvalidInput("scenario: duplicate key '" + key + "'");
    fields.values[key] = value;
  }

  SystemConfig cfg;
  fields.get("n_tx", cfg.n_tx);
  fields.get("n_tz", cfg.n_tz);
  fields.get("n_rf", cfg.n_rf);
  fields.get("n_s", cfg.n_s);
  fields.get("k_users", cfg.k_users);
  fields.get("m_y", cfg.m_y);
  fields.get("m_z", cfg.m_z);
  fields.get("m_sy", cfg.m_sy);
  fields.get("m_sz", cfg.m_sz);
  fields.get("carrier_freq", cfg.carrier_freq);
  fields.get("d0", cfg.d0);
  fields.get("dr", cfg.dr);
  fields.get("dy", cfg.dy);
  fields.get("dz", cfg.dz);
  fields.get("p0", cfg.p0);
  fields.get("r_th", cfg.r_th);
  fields.get("sigma0_sq", cfg.sigma0_sq);
  fields.get("sigmar_sq", cfg.sigmar_sq);
  fields.get("t_snapshots", cfg.t_snapshots);
  fields.get("target_eta", cfg.target_eta);
  fields.get("target_phi", cfg.target_phi);
  if (fields.has("alpha_mode")) {
    std::string mode;
    fields.get("alpha_mode", mode);
    if (mode == "auto")
      cfg.alpha_auto = true;
    else if (mode == "fixed")
      cfg.alpha_auto = false;
    else
      throw InvalidInput("scenario: alpha_mode must be 'auto' or 'fixed'");
  }
  double alpha_re = cfg.alpha.real(), alpha_im = cfg.alpha.imag();
  fields.get("alpha_re", alpha_re);
  fields.get("alpha_im", alpha_im);
  cfg.alpha = {alpha_re, alpha_im};
  fields.get("ris_target_distance", cfg.ris_target_distance);
  fields.get("n_cl", cfg.n_cl);
  fields.get("n_ray", cfg.n_ray);
  fields.get("bs_ris_distance", cfg.bs_ris_distance);
  fields.get_list("ris_user_distances", cfg.ris_user_distances);
  fields.get("rng_seed", cfg.rng_seed);
  if (fields.has("shadowing_mode")) {
    std::string mode;
    fields.get("shadowing_mode", mode);
    if (mode == "deterministic_zero")
      cfg.shadowing_mode = ShadowingMode::deterministic_zero;
    else if (mode == "gaussian")
      cfg.shadowing_mode = ShadowingMode::gaussian;
    else
      throw InvalidInput("scenario: unknown shadowing_mode '" + mode + "'");
  }

  if (!fields.values.empty())
    throw InvalidInput("scenario: unknown key '" + fields.values.begin()->first + "'");

  // A single user distance broadcasts across all users.
  if (cfg.ris_user_distances.size() == 1 && cfg.k_users > 1)
    cfg.ris_user_distances.assign(cfg.k_users, cfg.ris_user_distances[0]);
  if (cfg.k_users == 0) cfg.ris_user_distances.clear();

  cfg.validate();
  return cfg;
}

SystemConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("scenario: cannot open '" + path + "'");
  return load_scenario(in);
}

void save_scenario(const SystemConfig& cfg, std::ostream& out) {
  out.precision(17);
  out << "# risisac scenario (flat key-value, '#' starts a comment)\n";
  out << "n_tx = " << cfg.n_tx << "\n";
  out << "n_tz = " << cfg.n_tz << "\n";
  out << "n_rf = " << cfg.n_rf << "\n";
  out << "n_s = " << cfg.n_s << "\n";
  out << "k_users = " << cfg.k_users << "\n";
  out << "m_y = " << cfg.m_y << "\n";
  out << "m_z = " << cfg.m_z << "\n";
  out << "m_sy = " << cfg.m_sy << "\n";
  out << "m_sz = " << cfg.m_sz << "\n";
  out << "carrier_freq = " << cfg.carrier_freq << "\n";
  out << "d0 = " << cfg.d0 << "\n";
  out << "dr = " << cfg.dr << "\n";
  out << "dy = " << cfg.dy << "\n";
  out << "dz = " << cfg.dz << "\n";
  out << "p0 = " << cfg.p0 << "\n";
  out << "r_th = " << cfg.r_th << "\n";
  out << "sigma0_sq = " << cfg.sigma0_sq << "\n";
  out << "sigmar_sq = " << cfg.sigmar_sq << "\n";
  out << "t_snapshots = " << cfg.t_snapshots << "\n";
  out << "target_eta = " << cfg.target_eta << "\n";
  out << "target_phi = " << cfg.target_phi << "\n";
  out << "alpha_mode = " << (cfg.alpha_auto ? "auto" : "fixed") << "\n";
  out << "alpha_re = " << cfg.alpha.real() << "\n";
  out << "alpha_im = " << cfg.alpha.imag() << "\n";
  out << "ris_target_distance = " << cfg.ris_target_distance << "\n";
  out << "n_cl = " << cfg.n_cl << "\n";
  out << "n_ray = " << cfg.n_ray << "\n";
  out << "bs_ris_distance = " << cfg.bs_ris_distance << "\n";
  out << "ris_user_distances =";
  for (double d : cfg.ris_user_distances) out << " " << d;
  if (cfg.ris_user_distances.empty()) out << " 0";
  out << "\n";
  out << "rng_seed = " << cfg.rng_seed << "\n";
  out << "shadowing_mode = "
      << (cfg.shadowing_mode == ShadowingMode::gaussian ? "gaussian" : "deterministic_zero")
      << "\n";
}

std::string reference_scenario_text() {
  std::ostringstream out;
  out << "# risisac reference scenario: desk-scale geometry.\n"
         "# Angles are radians, powers watts, distances meters.\n"
         "# The short link distances keep the per-user rate thresholds\n"
         "# reachable at this array size; alpha is pinned to a target\n"
         "# return that puts the position-error bound in a useful range.\n";
  save_scenario(SystemConfig{}, out);
  return out.str();
}

}  // namespace risisac
