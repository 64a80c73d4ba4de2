#include "ringmd/system.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace ringmd {

int System::atom_index(int id) const {
    if (id >= 0 && id < static_cast<int>(atoms.size()) && atoms[id].id == id) return id;
    for (std::size_t i = 0; i < atoms.size(); ++i)
        if (atoms[i].id == id) return static_cast<int>(i);
    throw std::out_of_range("System: unknown atom id " + std::to_string(id));
}

double System::total_charge() const {
    double q = 0.0;
    for (const auto& a : atoms) q += a.charge;
    for (const auto& w : wcs) q += w.charge;
    return q;
}

void System::wrap_all() {
    for (auto& a : atoms) a.position = box.wrap(a.position);
}

namespace {

Vec3 random_unit_vector(Rng& rng) {
    // Marsaglia rejection on the sphere
    for (;;) {
        double u = rng.uniform(-1.0, 1.0);
        double v = rng.uniform(-1.0, 1.0);
        double s = u * u + v * v;
        if (s >= 1.0 || s == 0.0) continue;
        double f = 2.0 * std::sqrt(1.0 - s);
        return {u * f, v * f, 1.0 - 2.0 * s};
    }
}

Vec3 perpendicular_unit(const Vec3& n, Rng& rng) {
    for (;;) {
        Vec3 t = random_unit_vector(rng);
        Vec3 p = t - n * t.dot(n);
        double len = p.norm();
        if (len > 1e-8) return p / len;
    }
}

}  // namespace

System generate_water_system(const WaterGenParams& params, Rng& rng) {
    System sys;
    sys.box = SimulationBox(params.edge);

    std::vector<Vec3> oxygens;
    oxygens.reserve(params.waters);
    int tries = 0;
    while (static_cast<int>(oxygens.size()) < params.waters) {
        if (++tries > params.max_insert_tries)
            throw std::runtime_error("generate_water_system: could not place " +
                                     std::to_string(params.waters) + " oxygens with min O-O " +
                                     std::to_string(params.min_oo_dist) + " A; box too small");
        Vec3 cand{rng.uniform(0.0, params.edge.x), rng.uniform(0.0, params.edge.y),
                  rng.uniform(0.0, params.edge.z)};
        bool ok = true;
        for (const auto& o : oxygens) {
            if (sys.box.min_image_dist2(cand, o) < params.min_oo_dist * params.min_oo_dist) {
                ok = false;
                break;
            }
        }
        if (ok) oxygens.push_back(cand);
    }

    const double half_angle = 0.5 * params.hoh_angle_deg * std::numbers::pi / 180.0;
    int id = 0;
    for (const auto& o : oxygens) {
        Vec3 bisector = random_unit_vector(rng);
        Vec3 ortho = perpendicular_unit(bisector, rng);
        Vec3 h1 = bisector * std::cos(half_angle) + ortho * std::sin(half_angle);
        Vec3 h2 = bisector * std::cos(half_angle) - ortho * std::sin(half_angle);

        int o_id = id++;
        sys.atoms.push_back({o_id, Species::O, sys.box.wrap(o), {}, params.charge_o});
        sys.atoms.push_back(
            {id++, Species::H, sys.box.wrap(o + h1 * params.oh_bond), {}, params.charge_h});
        sys.atoms.push_back(
            {id++, Species::H, sys.box.wrap(o + h2 * params.oh_bond), {}, params.charge_h});
        sys.wcs.push_back({o_id, {}, params.charge_wc});
    }

    // Maxwell-Boltzmann velocities, then remove the net momentum drift
    Vec3 momentum{};
    double total_mass = 0.0;
    for (auto& a : sys.atoms) {
        double m = species_mass(a.species);
        double sigma = std::sqrt(units::k_boltzmann * params.temperature / m);
        a.velocity = {sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
        momentum += a.velocity * m;
        total_mass += m;
    }
    if (!sys.atoms.empty()) {
        Vec3 drift = momentum / total_mass;
        for (auto& a : sys.atoms) a.velocity -= drift;
    }
    return sys;
}

System replicate_box(const System& base, const Int3& factors, int max_particles) {
    if (factors.x < 1 || factors.y < 1 || factors.z < 1)
        throw std::invalid_argument("replicate_box: factors must be >= 1");
    long total = static_cast<long>(base.atoms.size() + base.wcs.size()) * factors.product();
    if (total > max_particles)
        throw std::overflow_error("replicate_box: " + std::to_string(total) +
                                  " particles exceeds limit " + std::to_string(max_particles));

    System out;
    out.box = SimulationBox(
        {base.box.lengths.x * factors.x, base.box.lengths.y * factors.y,
         base.box.lengths.z * factors.z});
    out.atoms.reserve(base.atoms.size() * factors.product());
    out.wcs.reserve(base.wcs.size() * factors.product());

    const int base_atoms = static_cast<int>(base.atoms.size());
    int replica = 0;
    for (int ix = 0; ix < factors.x; ++ix) {
        for (int iy = 0; iy < factors.y; ++iy) {
            for (int iz = 0; iz < factors.z; ++iz) {
                Vec3 shift{ix * base.box.lengths.x, iy * base.box.lengths.y,
                           iz * base.box.lengths.z};
                int id_offset = replica * base_atoms;
                for (const auto& a : base.atoms) {
                    Atom copy = a;
                    copy.id = a.id + id_offset;
                    copy.position = out.box.wrap(a.position + shift);
                    out.atoms.push_back(copy);
                }
                for (const auto& w : base.wcs) {
                    WannierCentroid copy = w;
                    copy.binding_atom_id = w.binding_atom_id + id_offset;
                    out.wcs.push_back(copy);
                }
                ++replica;
            }
        }
    }
    return out;
}

namespace {

nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string system_to_json(const System& system) {
    nlohmann::json j;
    j["box"] = vec_to_json(system.box.lengths);
    auto& atoms = j["atoms"] = nlohmann::json::array();
    for (const auto& a : system.atoms) {
        atoms.push_back({{"id", a.id},
                         {"species", a.species == Species::O ? "O" : "H"},
                         {"position", vec_to_json(a.position)},
                         {"velocity", vec_to_json(a.velocity)},
                         {"charge", a.charge}});
    }
    auto& wcs = j["wannier_centroids"] = nlohmann::json::array();
    for (const auto& w : system.wcs) {
        wcs.push_back({{"binding_atom_id", w.binding_atom_id},
                       {"displacement", vec_to_json(w.displacement)},
                       {"charge", w.charge}});
    }
    return j.dump(2);
}

System system_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    System sys;
    sys.box = SimulationBox(vec_from_json(j.at("box")));
    for (const auto& a : j.at("atoms")) {
        std::string sp = a.at("species").get<std::string>();
        if (sp != "O" && sp != "H")
            throw std::runtime_error("system_from_json: unknown species '" + sp + "'");
        sys.atoms.push_back({a.at("id").get<int>(), sp == "O" ? Species::O : Species::H,
                             vec_from_json(a.at("position")), vec_from_json(a.at("velocity")),
                             a.at("charge").get<double>()});
    }
    for (const auto& w : j.at("wannier_centroids")) {
        sys.wcs.push_back({w.at("binding_atom_id").get<int>(),
                           vec_from_json(w.at("displacement")), w.at("charge").get<double>()});
    }
    return sys;
}

void save_system(const System& system, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_system: cannot open " + path);
    out << system_to_json(system) << "\n";
}

System load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_system: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return system_from_json(ss.str());
}

std::string system_to_extxyz(const System& system) {
    std::ostringstream os;
    os.precision(10);
    os << system.atoms.size() + system.wcs.size() << "\n";
    const Vec3& l = system.box.lengths;
    os << "Lattice=\"" << l.x << " 0 0 0 " << l.y << " 0 0 0 " << l.z
       << "\" Properties=species:S:1:pos:R:3:charge:R:1 pbc=\"T T T\"\n";
    for (const auto& a : system.atoms) {
        os << (a.species == Species::O ? "O" : "H") << " " << a.position.x << " " << a.position.y
           << " " << a.position.z << " " << a.charge << "\n";
    }
    for (const auto& w : system.wcs) {
        Vec3 p = system.wc_position(w);
        os << "X " << p.x << " " << p.y << " " << p.z << " " << w.charge << "\n";
    }
    return os.str();
}

}  // namespace ringmd
