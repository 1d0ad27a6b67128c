#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chemrd/control.hpp"
#include "chemrd/errors.hpp"
#include "chemrd/grid.hpp"
#include "chemrd/stepper.hpp"

namespace chemrd::csv {

// Shortest round-trip decimal form; the single formatting convention for
// every CSV this project writes, so identical runs yield identical bytes.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write file: " + path.string());
    return out;
}

} // namespace detail

// Columns: t, masses and sup norms per species, the boundary drug inflow
// rate used by the step ending at t, and the total clipped mass of that
// step summed over species.
inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out = detail::open_out(path);
    out << "t,mass_N,mass_T,mass_I,mass_U,sup_N,sup_T,sup_I,sup_U,influx_U,clipped_total\n";
    for (const StepDiagnostics& d : traj.steps) {
        const double clipped = d.clipped[0] + d.clipped[1] + d.clipped[2] + d.clipped[3];
        out << format_double(d.t);
        for (int sp = 0; sp < 4; ++sp) out << ',' << format_double(d.mass[sp]);
        for (int sp = 0; sp < 4; ++sp) out << ',' << format_double(d.sup[sp]);
        out << ',' << format_double(d.influx) << ',' << format_double(clipped) << '\n';
    }
    if (!out) throw error("short write: " + path.string());
}

inline void write_snapshots(const std::filesystem::path& path, const Trajectory& traj,
                            const Grid1D& grid) {
    std::ofstream out = detail::open_out(path);
    out << "t,cell_index,x,N,T,I,U\n";
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        const StateVector& z = traj.snapshots[k];
        for (std::size_t i = 0; i < grid.n; ++i) {
            out << format_double(traj.snapshot_times[k]) << ',' << i << ','
                << format_double(grid.centers[i]) << ',' << format_double(z.N[i]) << ','
                << format_double(z.T[i]) << ',' << format_double(z.I[i]) << ','
                << format_double(z.U[i]) << '\n';
        }
    }
    if (!out) throw error("short write: " + path.string());
}

// One row per accepted optimizer iterate; J is the terminal tumor mass, so
// total = J + lambda_term + penalty.
inline void write_history(const std::filesystem::path& path,
                          const std::vector<HistoryEntry>& history) {
    std::ofstream out = detail::open_out(path);
    out << "iter,J,lambda_term,penalty,total,step_size,feasible_flag\n";
    for (const HistoryEntry& e : history) {
        out << e.iter << ',' << format_double(e.report.terminal_tumor_mass) << ','
            << format_double(e.report.lambda_term) << ',' << format_double(e.report.penalty) << ','
            << format_double(e.report.total) << ',' << format_double(e.step_size) << ','
            << (e.feasible ? 1 : 0) << '\n';
    }
    if (!out) throw error("short write: " + path.string());
}

inline void write_best_control(const std::filesystem::path& path, const InjectionSchedule& v) {
    std::ofstream out = detail::open_out(path);
    out << "patch,knot_time,value\n";
    const char* names[2] = {"left", "right"};
    for (int p = 0; p < 2; ++p)
        for (std::size_t j = 0; j < v.intervals(); ++j)
            out << names[p] << ',' << format_double(v.knots[j]) << ','
                << format_double(v.values[static_cast<std::size_t>(p)][j]) << '\n';
    if (!out) throw error("short write: " + path.string());
}

} // namespace chemrd::csv
