#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "risisac/rng.hpp"

namespace risisac {

/// Which vertical plane a uniform planar array sits in. Arrays in the y-z
/// plane (RIS reflecting and sensing elements) see a horizontal phase term
/// proportional to sin(eta); the transmit array in the x-z plane sees
/// cos(eta). Both share the cos(phi) vertical term.
enum class ArrayPlane { yz, xz };

/// Uniform planar array: `rows` elements along the horizontal axis (spacing
/// `dy`), `cols` along z (spacing `dz`).
struct ArrayGeometry {
  int rows = 1;
  int cols = 1;
  double dy = 0.0;
  double dz = 0.0;
  double wavelength = 0.0;
};

/// Normalized steering vector. Entry for element (iy, iz), flattened with
/// the horizontal index outermost, is
///   (1/sqrt(rows*cols)) * exp(-j (2*pi/lambda) (iy*c_eta*sin(phi)*dy + iz*cos(phi)*dz))
/// with c_eta = sin(eta) for yz arrays and cos(eta) for xz arrays.
Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double eta, double phi,
                                 ArrayPlane plane = ArrayPlane::yz);

enum class ShadowingMode { deterministic_zero, gaussian };

/// Full description of one simulation scenario. Loaded from / saved to a
/// flat key-value text file; see reference_scenario_text().
struct SystemConfig {
  // Transmit array (x-z plane) and RF chains.
  int n_tx = 8;
  int n_tz = 4;
  int n_rf = 4;
  int n_s = 4;       // transmit streams (communication + sensing)
  int k_users = 3;

  // RIS reflecting elements (y-z plane) and sensing elements.
  int m_y = 4;
  int m_z = 4;
  int m_sy = 2;
  int m_sz = 4;

  double carrier_freq = 28e9;  // Hz
  // Element spacings in meters: d0 transmit array, dr RIS elements as seen
  // by the propagation channels, dy/dz the sensing-geometry spacings.
  double d0 = 0.0053534;
  double dr = 0.0053534;
  double dy = 0.0053534;
  double dz = 0.0053534;

  double p0 = 1.0;            // transmit power budget, W
  double r_th = 0.3;          // per-user rate threshold, bits/s/Hz
  // Noise powers, W. Desk-scale arrays carry 20-40 dB less beamforming gain
  // than the large deployments the link budget is quoted for, so the
  // defaults sit below thermal levels to keep the default rate threshold
  // reachable through the cascaded (doubly-faded) channel.
  double sigma0_sq = 1e-18;
  double sigmar_sq = 1e-18;
  int t_snapshots = 128;

  double target_eta = 15.0 * M_PI / 180.0;  // azimuth, rad
  double target_phi = 75.0 * M_PI / 180.0;  // elevation, rad

  // Round-trip target gain. "auto" derives |alpha| from twice the LoS path
  // loss at ris_target_distance (unit radar cross-section, zero phase).
  bool alpha_auto = false;
  std::complex<double> alpha = {2e-5, 0.0};
  double ris_target_distance = 20.0;  // m

  int n_cl = 4;
  int n_ray = 5;
  double bs_ris_distance = 3.0;              // m
  std::vector<double> ris_user_distances = {3.0, 3.0, 3.0};  // m, one per user

  std::uint64_t rng_seed = 1;
  ShadowingMode shadowing_mode = ShadowingMode::deterministic_zero;

  int n_t() const { return n_tx * n_tz; }
  int m_reflect() const { return m_y * m_z; }
  int m_sense() const { return m_sy * m_sz; }
  double wavelength() const { return 299792458.0 / carrier_freq; }

  ArrayGeometry tx_geometry() const { return {n_tx, n_tz, d0, d0, wavelength()}; }
  ArrayGeometry ris_geometry() const { return {m_y, m_z, dr, dr, wavelength()}; }
  /// Reflecting-array geometry for sensing steering (dy/dz spacings).
  ArrayGeometry reflect_sense_geometry() const { return {m_y, m_z, dy, dz, wavelength()}; }
  ArrayGeometry sensor_geometry() const { return {m_sy, m_sz, dy, dz, wavelength()}; }

  /// Round-trip gain after resolving alpha_auto.
  std::complex<double> resolved_alpha() const;

  /// Throws InvalidInput if any invariant fails (positive dimensions,
  /// k_users <= n_s <= n_rf <= n_t, angle ranges, distance count, ...).
  void validate() const;
};

/// Large-scale path loss in dB: gamma_a + 10*gamma_b*log10(d) + shadow_db,
/// with (61.4, 2.0) line-of-sight and (72.0, 2.92) otherwise. The shadowing
/// standard deviations that go with the two modes are 5.8 dB and 8.7 dB.
double path_loss_db(double distance_m, bool line_of_sight, double shadow_db = 0.0);
double shadowing_std_db(bool line_of_sight);

/// One resolved propagation ray. Arrival angles (eta_r, phi_r) index the
/// receive-side array, departure angles (eta_t, phi_t) the transmit side.
struct RayPath {
  double eta_r = 0.0;
  double phi_r = 0.0;
  double eta_t = 0.0;
  double phi_t = 0.0;
  std::complex<double> gain;
  bool los = false;
};

/// Cluster/ray metadata for one link, kept so channels can be re-assembled
/// or perturbed in tests.
struct PathSet {
  std::vector<RayPath> rays;
};

struct ChannelSet {
  Eigen::MatrixXcd h;                   // BS -> RIS, m_reflect x n_t
  std::vector<Eigen::VectorXcd> g;      // RIS -> user k, m_reflect each
  PathSet h_paths;
  std::vector<PathSet> g_paths;
};

/// Cluster centers are uniform over the angle domain; rays scatter around
/// them with Laplacian spread (scale 5 degrees). The first cluster carries
/// line-of-sight large-scale statistics, the rest non-line-of-sight.
PathSet draw_paths(const SystemConfig& cfg, double distance_m, bool with_departure,
                   RandomStream& stream);

/// sqrt(n_rx*n_tx_side/(n_cl*n_ray)) * sum of gain * a_rx * a_tx^H over rays.
Eigen::MatrixXcd assemble_bs_ris_channel(const SystemConfig& cfg, const PathSet& paths);
Eigen::VectorXcd assemble_user_channel(const SystemConfig& cfg, const PathSet& paths);

/// Draws every link of the scenario from streams derived from cfg.rng_seed.
ChannelSet generate_channels(const SystemConfig& cfg);

/// Flat key-value scenario file support. The loader rejects unknown keys.
SystemConfig load_scenario(std::istream& in);
SystemConfig load_scenario_file(const std::string& path);
void save_scenario(const SystemConfig& cfg, std::ostream& out);

/// The annotated default scenario (desk-scale geometry).
std::string reference_scenario_text();

}  // namespace risisac
