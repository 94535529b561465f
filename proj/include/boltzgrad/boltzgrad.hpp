#pragma once

// Umbrella header for the kinetic-theory laboratory.

#include "boltzgrad/boltzmann.hpp"
#include "boltzgrad/errors.hpp"
#include "boltzgrad/hierarchy.hpp"
#include "boltzgrad/lab.hpp"
#include "boltzgrad/marginals.hpp"
#include "boltzgrad/md.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/rng.hpp"
#include "boltzgrad/scattering.hpp"
#include "boltzgrad/vec3.hpp"
