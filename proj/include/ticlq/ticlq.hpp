#pragma once

#include "ticlq/numerics.hpp"
#include "ticlq/problem.hpp"
#include "ticlq/oracles.hpp"
#include "ticlq/game.hpp"
#include "ticlq/volterra.hpp"
