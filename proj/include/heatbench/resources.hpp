#pragma once

// Training-resource accounting: trainable-parameter audits, wall-clock
// bookkeeping, and the energy/CO2 estimate
//
//   energy_kwh  = avg_power_watts * runtime_hours / 1000
//   emissions_g = energy_kwh * carbon_intensity
//
// Power draw and grid carbon intensity are config inputs, not measurements;
// the defaults below are documented assumptions, so a report always carries
// the inputs it was computed from.

#include <string>
#include <vector>

#include "heatbench/errors.hpp"
#include "heatbench/models.hpp"
#include "heatbench/train.hpp"

namespace heatbench {

struct DeviceProfile {
  std::string name = "laptop-cpu";
  double avg_power_watts = 28.0;  // sustained package power of a laptop-class CPU
};

inline DeviceProfile laptop_cpu_profile() { return {"laptop-cpu", 28.0}; }
inline DeviceProfile datacenter_gpu_profile() { return {"datacenter-gpu", 300.0}; }

// Medium-term European grid average; override per deployment in the config.
inline constexpr double kDefaultCarbonIntensity = 400.0;  // gCO2e per kWh

struct EmissionsEstimate {
  double energy_kwh = 0.0;
  double emissions_g = 0.0;
};

inline EmissionsEstimate estimate_emissions(double runtime_hours, const DeviceProfile& device,
                                            double carbon_intensity_g_per_kwh) {
  if (runtime_hours < 0.0) throw UsageError("estimate_emissions: negative runtime");
  if (device.avg_power_watts <= 0.0) throw UsageError("estimate_emissions: power must be > 0");
  if (carbon_intensity_g_per_kwh < 0.0)
    throw UsageError("estimate_emissions: negative carbon intensity");
  EmissionsEstimate e;
  e.energy_kwh = device.avg_power_watts * runtime_hours / 1000.0;
  e.emissions_g = e.energy_kwh * carbon_intensity_g_per_kwh;
  return e;
}

struct ResourceReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t trainable_params = 0;
  std::size_t epochs = 0;
  double runtime_per_epoch_min = 0.0;
  double total_runtime_min = 0.0;
  DeviceProfile device;
  double carbon_intensity_g_per_kwh = kDefaultCarbonIntensity;
  double energy_kwh = 0.0;
  double emissions_g = 0.0;
};

inline ResourceReport build_resource_report(const TrainedModel& trained,
                                            const DeviceProfile& device,
                                            double carbon_intensity_g_per_kwh) {
  ResourceReport r;
  r.model = to_string(trained.spec.kind);
  r.seed = trained.seed;
  r.trainable_params = count_parameters(trained.spec);
  r.epochs = trained.epochs_run();
  r.total_runtime_min = trained.total_seconds / 60.0;
  r.runtime_per_epoch_min = trained.seconds_per_epoch() / 60.0;
  r.device = device;
  r.carbon_intensity_g_per_kwh = carbon_intensity_g_per_kwh;
  const EmissionsEstimate e =
      estimate_emissions(trained.total_seconds / 3600.0, device, carbon_intensity_g_per_kwh);
  r.energy_kwh = e.energy_kwh;
  r.emissions_g = e.emissions_g;
  return r;
}

}  // namespace heatbench
