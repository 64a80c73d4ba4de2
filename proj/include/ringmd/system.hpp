#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ringmd/box.hpp"
#include "ringmd/rng.hpp"
#include "ringmd/vec.hpp"

namespace ringmd {

// Reduced units: length in Angstrom, time in fs, charge in e, energy in
// e^2/Angstrom (Coulomb constant = 1). Masses and k_B are expressed in those
// units so that kinetic energy (1/2) m v^2 comes out in energy units.
namespace units {
// 1 amu expressed in energy_unit * fs^2 / Angstrom^2
inline constexpr double amu = 7.1975;
// Boltzmann constant in energy_unit / K
inline constexpr double k_boltzmann = 5.98491e-6;
}  // namespace units

enum class Species : std::uint8_t { O = 0, H = 1 };

inline double species_mass(Species s) {
    return (s == Species::O ? 15.999 : 1.008) * units::amu;
}

struct Atom {
    int id = 0;
    Species species = Species::O;
    Vec3 position;   // Angstrom, wrapped into the box
    Vec3 velocity;   // Angstrom / fs
    double charge = 0.0;  // e
};

// One Wannier centroid per oxygen. Its absolute position is
// binding atom position + displacement; only the displacement is stored.
struct WannierCentroid {
    int binding_atom_id = 0;
    Vec3 displacement;    // Angstrom
    double charge = 0.0;  // e, negative
};

struct System {
    SimulationBox box;
    std::vector<Atom> atoms;
    std::vector<WannierCentroid> wcs;

    std::size_t size() const { return atoms.size(); }

    // index of the atom with the given id (ids are dense after generation,
    // but lookup stays correct for arbitrary unique ids)
    int atom_index(int id) const;

    Vec3 wc_position(const WannierCentroid& wc) const {
        return box.wrap(atoms[atom_index(wc.binding_atom_id)].position + wc.displacement);
    }

    double total_charge() const;
    void wrap_all();
};

struct WaterGenParams {
    int waters = 32;
    Vec3 edge{10.0, 10.0, 10.0};
    double min_oo_dist = 2.4;      // Angstrom
    double oh_bond = 0.9572;       // Angstrom
    double hoh_angle_deg = 104.52;
    double charge_o = 6.0;
    double charge_h = 1.0;
    double charge_wc = -8.0;
    double temperature = 300.0;    // K, for the initial velocity draw
    int max_insert_tries = 20000;
};

// Random water-like configuration: oxygens inserted with a minimum O-O
// distance, hydrogens placed at fixed bond length/angle in a random
// orientation, one WC per oxygen. Charges follow the valence-electron
// convention (each molecule is neutral). Throws if packing fails.
System generate_water_system(const WaterGenParams& params, Rng& rng);

inline constexpr int kDefaultMaxParticles = 4'000'000;

// Periodic replication of the whole cell by integer factors per axis.
System replicate_box(const System& base, const Int3& factors,
                     int max_particles = kDefaultMaxParticles);

// JSON round trip and extended-XYZ export
std::string system_to_json(const System& system);
System system_from_json(const std::string& text);
void save_system(const System& system, const std::string& path);
System load_system(const std::string& path);
std::string system_to_extxyz(const System& system);

}  // namespace ringmd
