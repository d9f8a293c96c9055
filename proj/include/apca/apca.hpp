// Umbrella header.

#pragma once

#include "apca/core.hpp"
#include "apca/data_io.hpp"
#include "apca/eval.hpp"
#include "apca/linalg.hpp"
#include "apca/matrix.hpp"
#include "apca/model.hpp"
#include "apca/randomized.hpp"
#include "apca/rng.hpp"
