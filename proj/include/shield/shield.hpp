#pragma once

#include "errors.hpp"
#include "quadric.hpp"
#include "geometry.hpp"
#include "shield_builder.hpp"
#include "rigidity.hpp"
#include "controller.hpp"
#include "simulator.hpp"
