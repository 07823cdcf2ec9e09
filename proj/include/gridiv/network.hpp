#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "gridiv/errors.hpp"

namespace gridiv {

using Complex = std::complex<double>;

// -- devices -----------------------------------------------------------------

/// Voltage reference. Fixes its bus voltage; the balancing injection is
/// recovered after the solve rather than modeled as a current here.
struct SlackDevice {
    double v_set_real = 1.0;
    double v_set_imag = 0.0;
};

struct PQLoad {
    double p = 0.0;
    double q = 0.0;
};

/// Active-power setpoint with voltage-magnitude control; its reactive output
/// is an extra solver unknown paired with the |V| row.
struct PVGenerator {
    double p = 0.0;
    double v_set_mag = 1.0;
};

/// Composite load: constant-impedance / constant-current / constant-power mix
/// of the nominal (p0, q0), fractions summing to one.
struct ZipLoad {
    double p0 = 0.0;
    double q0 = 0.0;
    double z_frac = 0.0;
    double i_frac = 0.0;
    double p_frac = 1.0;
};

/// Free current injection that measures KCL violation. Holds zero in power
/// flow; its components become decision variables in the OPF.
struct InfeasibilitySource {
    double i_real = 0.0;
    double i_imag = 0.0;
};

using DeviceModel = std::variant<SlackDevice, PQLoad, PVGenerator, ZipLoad, InfeasibilitySource>;

struct PhysicsDevice {
    DeviceModel model;
    int bus = 0;
};

struct Bus {
    int id = 0;
    double v_init_real = 1.0;
    double v_init_imag = 0.0;
};

/// pi-model transmission element: series admittance plus half the shunt
/// susceptance at each end.
struct Branch {
    int from = 0;
    int to = 0;
    double series_conductance = 0.0;
    double series_susceptance = 0.0;
    double total_shunt_susceptance = 0.0;
};

/// Attaches a forecast model to a bus. `features` lists the exogenous feature
/// names (in model input order) pulled from the global exogenous vector;
/// empty means "use the model's own input_spec names".
struct ForecastBinding {
    int bus = 0;
    std::string model_id;
    std::vector<std::string> features;
};

// -- exogenous features -------------------------------------------------------

/// Named exogenous features (temperature, irradiance, ...) with a stable
/// name -> index layout.
class ExogenousVector {
public:
    ExogenousVector() = default;

    void set(const std::string& name, double value);
    double get(const std::string& name) const;
    bool has(const std::string& name) const;
    std::size_t index_of(const std::string& name) const;

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<double>& values() const { return values_; }
    double value_at(std::size_t i) const { return values_[i]; }
    void set_at(std::size_t i, double value) { values_[i] = value; }

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
};

// -- network ------------------------------------------------------------------

struct Network {
    double base_power = 100.0;  // MVA; everything else is per-unit
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<PhysicsDevice> devices;
    std::vector<ForecastBinding> forecast_bindings;

    std::size_t bus_index(int id) const;
    std::size_t slack_device_index() const;
    int slack_bus_id() const;
    std::vector<std::size_t> pv_device_indices() const;
    std::vector<std::size_t> infeasibility_device_indices() const;

    /// Checks every structural invariant; throws ValidationError naming the
    /// first one that fails.
    void validate() const;
};

/// Parses the JSON case document. Errors carry the byte position (ParseError)
/// or the violated invariant (ValidationError).
Network parse_case(const std::string& text);

/// Canonical serialization; parse_case(serialize_case(n)) == n and the output
/// is byte-stable under round-trip.
std::string serialize_case(const Network& net);

// -- device current evaluation --------------------------------------------------

struct CurrentPair {
    double real = 0.0;
    double imag = 0.0;
};

/// First partials of a device current with respect to its bus voltage.
struct CurrentJacobian {
    double dr_dvr = 0.0;
    double dr_dvi = 0.0;
    double di_dvr = 0.0;
    double di_dvi = 0.0;
};

/// Second partials: h[component][a][b] with component 0 = I_R, 1 = I_I and
/// a, b indexing (V_R, V_I). Symmetric in (a, b).
struct CurrentHessian {
    std::array<std::array<std::array<double, 2>, 2>, 2> h{};
};

/// Load-convention device current (out of the bus into the device). Generators
/// return the negative of their injection; the slack returns zero. `gen_q` is
/// the PV generator's reactive output (a solver unknown, not a device field).
CurrentPair device_current(const PhysicsDevice& d, double v_real, double v_imag,
                           double gen_q = 0.0);

/// Analytic voltage partials of device_current.
CurrentJacobian device_current_jacobian(const PhysicsDevice& d, double v_real, double v_imag,
                                        double gen_q = 0.0);

/// Analytic second derivatives of device_current with respect to voltage.
CurrentHessian device_current_hessian(const PhysicsDevice& d, double v_real, double v_imag,
                                      double gen_q = 0.0);

// Constant-power primitive I = conj(S/V) shared by loads and generators,
// with its derivative family (used directly by the solvers for dispatched
// generators, where S depends on decision variables).
CurrentPair power_current(Complex s, Complex v);
CurrentJacobian power_current_jacobian(Complex s, Complex v);
CurrentHessian power_current_hessian(Complex s, Complex v);
CurrentPair power_current_dp(Complex v);  // d I / d P at fixed V
CurrentPair power_current_dq(Complex v);  // d I / d Q at fixed V
CurrentJacobian power_current_dp_dv(Complex v);  // d/dV of dI/dP
CurrentJacobian power_current_dq_dv(Complex v);  // d/dV of dI/dQ

/// Currents out of each end of a branch: first out of `from`, second out of
/// `to`.
std::pair<Complex, Complex> branch_currents(const Branch& br, Complex v_from, Complex v_to);

}  // namespace gridiv
