#include "gridiv/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gridiv {

using json = nlohmann::json;

namespace {

constexpr double kVoltageFloor = 1e-6;

void require_voltage(Complex v) {
    if (std::abs(v) <= kVoltageFloor)
        throw VoltageCollapse("device evaluation at |V| = " + std::to_string(std::abs(v)) +
                              " <= 1e-6");
}

double finite_or_throw(const json& j, const char* field) {
    if (!j.is_number())
        throw ParseError(std::string("field '") + field + "' is not a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
        throw ParseError(std::string("field '") + field + "' is not finite");
    return v;
}

}  // namespace

// -- ExogenousVector -----------------------------------------------------------

void ExogenousVector::set(const std::string& name, double value) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            values_[i] = value;
            return;
        }
    }
    names_.push_back(name);
    values_.push_back(value);
}

double ExogenousVector::get(const std::string& name) const {
    return values_[index_of(name)];
}

bool ExogenousVector::has(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ExogenousVector::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw MissingFeature("exogenous feature '" + name + "' is not present");
}

// -- Network -------------------------------------------------------------------

std::size_t Network::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    throw ValidationError("bus id " + std::to_string(id) + " does not exist");
}

std::size_t Network::slack_device_index() const {
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (std::holds_alternative<SlackDevice>(devices[i].model)) return i;
    throw ValidationError("network has no slack device");
}

int Network::slack_bus_id() const { return devices[slack_device_index()].bus; }

std::vector<std::size_t> Network::pv_device_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (std::holds_alternative<PVGenerator>(devices[i].model)) out.push_back(i);
    return out;
}

std::vector<std::size_t> Network::infeasibility_device_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (std::holds_alternative<InfeasibilitySource>(devices[i].model)) out.push_back(i);
    return out;
}

void Network::validate() const {
    std::set<int> ids;
    for (const Bus& b : buses) {
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        const double mag = std::hypot(b.v_init_real, b.v_init_imag);
        if (!(mag > 0.0) || mag > 2.0)
            throw ValidationError("bus " + std::to_string(b.id) + " v_init magnitude " +
                                  std::to_string(mag) + " outside (0, 2]");
    }
    for (const Branch& br : branches) {
        if (br.from == br.to)
            throw ValidationError("branch endpoints coincide at bus " + std::to_string(br.from));
        if (!ids.count(br.from) || !ids.count(br.to))
            throw ValidationError("branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to) + " references a nonexistent bus");
        if (br.series_conductance == 0.0 && br.series_susceptance == 0.0)
            throw ValidationError("branch " + std::to_string(br.from) + "-" +
                                  std::to_string(br.to) + " has zero series admittance");
    }
    std::size_t n_slack = 0;
    for (const PhysicsDevice& d : devices) {
        if (!ids.count(d.bus))
            throw ValidationError("device references nonexistent bus " + std::to_string(d.bus));
        if (std::holds_alternative<SlackDevice>(d.model)) ++n_slack;
        if (const auto* zip = std::get_if<ZipLoad>(&d.model)) {
            const double sum = zip->z_frac + zip->i_frac + zip->p_frac;
            if (std::abs(sum - 1.0) > 1e-9)
                throw ValidationError("zip_load fractions at bus " + std::to_string(d.bus) +
                                      " sum to " + std::to_string(sum) + ", expected 1");
        }
        if (const auto* pv = std::get_if<PVGenerator>(&d.model)) {
            if (!(pv->v_set_mag > 0.0) || pv->v_set_mag > 2.0)
                throw ValidationError("pv_generator v_set_mag " + std::to_string(pv->v_set_mag) +
                                      " outside (0, 2] at bus " + std::to_string(d.bus));
        }
    }
    if (n_slack != 1)
        throw ValidationError("network has " + std::to_string(n_slack) +
                              " slack devices, expected exactly 1");
    for (const ForecastBinding& fb : forecast_bindings) {
        if (!ids.count(fb.bus))
            throw ValidationError("forecast binding references nonexistent bus " +
                                  std::to_string(fb.bus));
        if (fb.model_id.empty())
            throw ValidationError("forecast binding at bus " + std::to_string(fb.bus) +
                                  " has an empty model id");
    }
}

// -- case file I/O ---------------------------------------------------------------

namespace {

json device_to_json(const PhysicsDevice& d) {
    json j;
    j["bus"] = d.bus;
    if (const auto* s = std::get_if<SlackDevice>(&d.model)) {
        j["kind"] = "slack";
        j["v_set_real"] = s->v_set_real;
        j["v_set_imag"] = s->v_set_imag;
    } else if (const auto* pq = std::get_if<PQLoad>(&d.model)) {
        j["kind"] = "pq_load";
        j["p"] = pq->p;
        j["q"] = pq->q;
    } else if (const auto* pv = std::get_if<PVGenerator>(&d.model)) {
        j["kind"] = "pv_generator";
        j["p"] = pv->p;
        j["v_set_mag"] = pv->v_set_mag;
    } else if (const auto* z = std::get_if<ZipLoad>(&d.model)) {
        j["kind"] = "zip_load";
        j["p0"] = z->p0;
        j["q0"] = z->q0;
        j["z_frac"] = z->z_frac;
        j["i_frac"] = z->i_frac;
        j["p_frac"] = z->p_frac;
    } else if (const auto* inf = std::get_if<InfeasibilitySource>(&d.model)) {
        j["kind"] = "infeasibility_source";
        j["i_real"] = inf->i_real;
        j["i_imag"] = inf->i_imag;
    }
    return j;
}

PhysicsDevice device_from_json(const json& j) {
    PhysicsDevice d;
    if (!j.contains("kind")) throw ParseError("device entry lacks 'kind'");
    if (!j.contains("bus")) throw ParseError("device entry lacks 'bus'");
    d.bus = j.at("bus").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "slack") {
        SlackDevice s;
        s.v_set_real = finite_or_throw(j.at("v_set_real"), "v_set_real");
        s.v_set_imag = finite_or_throw(j.at("v_set_imag"), "v_set_imag");
        d.model = s;
    } else if (kind == "pq_load") {
        PQLoad pq;
        pq.p = finite_or_throw(j.at("p"), "p");
        pq.q = finite_or_throw(j.at("q"), "q");
        d.model = pq;
    } else if (kind == "pv_generator") {
        PVGenerator pv;
        pv.p = finite_or_throw(j.at("p"), "p");
        pv.v_set_mag = finite_or_throw(j.at("v_set_mag"), "v_set_mag");
        d.model = pv;
    } else if (kind == "zip_load") {
        ZipLoad z;
        z.p0 = finite_or_throw(j.at("p0"), "p0");
        z.q0 = finite_or_throw(j.at("q0"), "q0");
        z.z_frac = finite_or_throw(j.at("z_frac"), "z_frac");
        z.i_frac = finite_or_throw(j.at("i_frac"), "i_frac");
        z.p_frac = finite_or_throw(j.at("p_frac"), "p_frac");
        d.model = z;
    } else if (kind == "infeasibility_source") {
        InfeasibilitySource inf;
        inf.i_real = j.value("i_real", 0.0);
        inf.i_imag = j.value("i_imag", 0.0);
        d.model = inf;
    } else {
        throw ParseError("unknown device kind '" + kind + "'");
    }
    return d;
}

}  // namespace

Network parse_case(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("case document: " + std::string(e.what()));
    }
    Network net;
    try {
        net.base_power = doc.value("base_mva", 100.0);
        for (const json& jb : doc.value("buses", json::array())) {
            Bus b;
            b.id = jb.at("id").get<int>();
            b.v_init_real = jb.value("v_init_real", 1.0);
            b.v_init_imag = jb.value("v_init_imag", 0.0);
            net.buses.push_back(b);
        }
        for (const json& jb : doc.value("branches", json::array())) {
            Branch br;
            br.from = jb.at("from").get<int>();
            br.to = jb.at("to").get<int>();
            br.series_conductance = finite_or_throw(jb.at("series_conductance"),
                                                    "series_conductance");
            br.series_susceptance = finite_or_throw(jb.at("series_susceptance"),
                                                    "series_susceptance");
            br.total_shunt_susceptance = jb.value("total_shunt_susceptance", 0.0);
            net.branches.push_back(br);
        }
        for (const json& jd : doc.value("devices", json::array()))
            net.devices.push_back(device_from_json(jd));
        for (const json& jf : doc.value("forecast_bindings", json::array())) {
            ForecastBinding fb;
            fb.bus = jf.at("bus").get<int>();
            fb.model_id = jf.at("model_id").get<std::string>();
            for (const json& name : jf.value("features", json::array()))
                fb.features.push_back(name.get<std::string>());
            net.forecast_bindings.push_back(fb);
        }
    } catch (const json::exception& e) {
        throw ParseError("case document: " + std::string(e.what()));
    }
    net.validate();
    return net;
}

std::string serialize_case(const Network& net) {
    json doc;
    doc["base_mva"] = net.base_power;
    doc["buses"] = json::array();
    for (const Bus& b : net.buses)
        doc["buses"].push_back(
            {{"id", b.id}, {"v_init_real", b.v_init_real}, {"v_init_imag", b.v_init_imag}});
    doc["branches"] = json::array();
    for (const Branch& br : net.branches)
        doc["branches"].push_back({{"from", br.from},
                                   {"to", br.to},
                                   {"series_conductance", br.series_conductance},
                                   {"series_susceptance", br.series_susceptance},
                                   {"total_shunt_susceptance", br.total_shunt_susceptance}});
    doc["devices"] = json::array();
    for (const PhysicsDevice& d : net.devices) doc["devices"].push_back(device_to_json(d));
    doc["forecast_bindings"] = json::array();
    for (const ForecastBinding& fb : net.forecast_bindings) {
        json j;
        j["bus"] = fb.bus;
        j["model_id"] = fb.model_id;
        j["features"] = fb.features;
        doc["forecast_bindings"].push_back(j);
    }
    return doc.dump(2) + "\n";
}

// -- device currents ---------------------------------------------------------------

CurrentPair power_current(Complex s, Complex v) {
    const Complex f = std::conj(s) / std::conj(v);
    return {f.real(), f.imag()};
}

CurrentJacobian power_current_jacobian(Complex s, Complex v) {
    // f(V) = conj(S)/conj(V); d conj(V)/dV_R = 1, d conj(V)/dV_I = -i
    const Complex vb = std::conj(v);
    const Complex d = -std::conj(s) / (vb * vb);
    const Complex d_vr = d;
    const Complex d_vi = d * Complex(0.0, -1.0);
    return {d_vr.real(), d_vi.real(), d_vr.imag(), d_vi.imag()};
}

CurrentHessian power_current_hessian(Complex s, Complex v) {
    const Complex vb = std::conj(v);
    const Complex f2 = 2.0 * std::conj(s) / (vb * vb * vb);
    const Complex rr = f2;
    const Complex ri = f2 * Complex(0.0, -1.0);
    const Complex ii = -f2;
    CurrentHessian out;
    out.h[0][0][0] = rr.real();
    out.h[0][0][1] = ri.real();
    out.h[0][1][0] = ri.real();
    out.h[0][1][1] = ii.real();
    out.h[1][0][0] = rr.imag();
    out.h[1][0][1] = ri.imag();
    out.h[1][1][0] = ri.imag();
    out.h[1][1][1] = ii.imag();
    return out;
}

CurrentPair power_current_dp(Complex v) {
    const Complex d = 1.0 / std::conj(v);
    return {d.real(), d.imag()};
}

CurrentPair power_current_dq(Complex v) {
    const Complex d = Complex(0.0, -1.0) / std::conj(v);
    return {d.real(), d.imag()};
}

CurrentJacobian power_current_dp_dv(Complex v) {
    const Complex vb = std::conj(v);
    const Complex base = -1.0 / (vb * vb);
    const Complex d_vr = base;
    const Complex d_vi = base * Complex(0.0, -1.0);
    return {d_vr.real(), d_vi.real(), d_vr.imag(), d_vi.imag()};
}

CurrentJacobian power_current_dq_dv(Complex v) {
    const Complex vb = std::conj(v);
    const Complex base = Complex(0.0, 1.0) / (vb * vb);
    const Complex d_vr = base;
    const Complex d_vi = base * Complex(0.0, -1.0);
    return {d_vr.real(), d_vi.real(), d_vr.imag(), d_vi.imag()};
}

namespace {

// ZIP current: I = conj(p0 + j q0) * (z V + i m / conj(V) + p / conj(V)),
// m = |V|. The constant-impedance term is linear in V.
CurrentPair zip_current(const ZipLoad& z, Complex v) {
    const Complex cb = Complex(z.p0, -z.q0);
    const double m = std::abs(v);
    const Complex vb = std::conj(v);
    const Complex f = cb * (z.z_frac * v + z.i_frac * m / vb + z.p_frac / vb);
    return {f.real(), f.imag()};
}

CurrentJacobian zip_jacobian(const ZipLoad& z, Complex v) {
    const Complex cb = Complex(z.p0, -z.q0);
    const double m = std::abs(v);
    const double vr = v.real(), vi = v.imag();
    const Complex vb = std::conj(v);
    const Complex inv_vb = 1.0 / vb;
    const Complex inv_vb2 = inv_vb * inv_vb;
    const Complex mi(0.0, -1.0);

    // d(1/conj(V))/dV_R = -1/conj(V)^2, d/dV_I = +i/conj(V)^2
    const Complex dinv_r = -inv_vb2;
    const Complex dinv_i = -inv_vb2 * mi;
    const double dm_r = vr / m;
    const double dm_i = vi / m;

    const Complex d_vr = cb * (z.z_frac * 1.0 + z.i_frac * (dm_r * inv_vb + m * dinv_r) +
                               z.p_frac * dinv_r);
    const Complex d_vi = cb * (z.z_frac * Complex(0.0, 1.0) +
                               z.i_frac * (dm_i * inv_vb + m * dinv_i) + z.p_frac * dinv_i);
    return {d_vr.real(), d_vi.real(), d_vr.imag(), d_vi.imag()};
}

CurrentHessian zip_hessian(const ZipLoad& z, Complex v) {
    const Complex cb = Complex(z.p0, -z.q0);
    const double m = std::abs(v);
    const double vr = v.real(), vi = v.imag();
    const Complex vb = std::conj(v);
    const Complex inv_vb = 1.0 / vb;
    const Complex inv_vb2 = inv_vb * inv_vb;
    const Complex inv_vb3 = inv_vb2 * inv_vb;
    const Complex mi(0.0, -1.0);

    const Complex dinv[2] = {-inv_vb2, -inv_vb2 * mi};
    const Complex d2inv[2][2] = {{2.0 * inv_vb3, 2.0 * inv_vb3 * mi},
                                 {2.0 * inv_vb3 * mi, -2.0 * inv_vb3}};
    const double dm[2] = {vr / m, vi / m};
    const double m3 = m * m * m;
    const double d2m[2][2] = {{vi * vi / m3, -vr * vi / m3}, {-vr * vi / m3, vr * vr / m3}};

    CurrentHessian out;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const Complex t_i = d2m[a][b] * inv_vb + dm[a] * dinv[b] + dm[b] * dinv[a] +
                                m * d2inv[a][b];
            const Complex t_p = d2inv[a][b];
            const Complex total = cb * (z.i_frac * t_i + z.p_frac * t_p);
            out.h[0][a][b] = total.real();
            out.h[1][a][b] = total.imag();
        }
    }
    return out;
}

}  // namespace

CurrentPair device_current(const PhysicsDevice& d, double v_real, double v_imag, double gen_q) {
    const Complex v(v_real, v_imag);
    if (std::holds_alternative<SlackDevice>(d.model)) return {0.0, 0.0};
    if (const auto* inf = std::get_if<InfeasibilitySource>(&d.model))
        return {-inf->i_real, -inf->i_imag};
    require_voltage(v);
    if (const auto* pq = std::get_if<PQLoad>(&d.model))
        return power_current(Complex(pq->p, pq->q), v);
    if (const auto* pv = std::get_if<PVGenerator>(&d.model)) {
        const CurrentPair inj = power_current(Complex(pv->p, gen_q), v);
        return {-inj.real, -inj.imag};
    }
    return zip_current(std::get<ZipLoad>(d.model), v);
}

CurrentJacobian device_current_jacobian(const PhysicsDevice& d, double v_real, double v_imag,
                                        double gen_q) {
    const Complex v(v_real, v_imag);
    if (std::holds_alternative<SlackDevice>(d.model) ||
        std::holds_alternative<InfeasibilitySource>(d.model))
        return {};
    require_voltage(v);
    if (const auto* pq = std::get_if<PQLoad>(&d.model))
        return power_current_jacobian(Complex(pq->p, pq->q), v);
    if (const auto* pv = std::get_if<PVGenerator>(&d.model)) {
        CurrentJacobian j = power_current_jacobian(Complex(pv->p, gen_q), v);
        return {-j.dr_dvr, -j.dr_dvi, -j.di_dvr, -j.di_dvi};
    }
    return zip_jacobian(std::get<ZipLoad>(d.model), v);
}

CurrentHessian device_current_hessian(const PhysicsDevice& d, double v_real, double v_imag,
                                      double gen_q) {
    const Complex v(v_real, v_imag);
    if (std::holds_alternative<SlackDevice>(d.model) ||
        std::holds_alternative<InfeasibilitySource>(d.model))
        return {};
    require_voltage(v);
    if (const auto* pq = std::get_if<PQLoad>(&d.model))
        return power_current_hessian(Complex(pq->p, pq->q), v);
    if (const auto* pv = std::get_if<PVGenerator>(&d.model)) {
        CurrentHessian h = power_current_hessian(Complex(pv->p, gen_q), v);
        for (auto& comp : h.h)
            for (auto& row : comp)
                for (double& e : row) e = -e;
        return h;
    }
    return zip_hessian(std::get<ZipLoad>(d.model), v);
}

std::pair<Complex, Complex> branch_currents(const Branch& br, Complex v_from, Complex v_to) {
    const Complex y_series(br.series_conductance, br.series_susceptance);
    const Complex y_shunt_half(0.0, br.total_shunt_susceptance / 2.0);
    const Complex i_from = y_series * (v_from - v_to) + y_shunt_half * v_from;
    const Complex i_to = y_series * (v_to - v_from) + y_shunt_half * v_to;
    return {i_from, i_to};
}

}  // namespace gridiv
