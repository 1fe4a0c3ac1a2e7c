#pragma once

#include "ccgeo/ballbox.hpp"
#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"
#include "ccgeo/flow.hpp"
#include "ccgeo/frame.hpp"
#include "ccgeo/lifting.hpp"
#include "ccgeo/linalg.hpp"
#include "ccgeo/palais.hpp"
#include "ccgeo/specfile.hpp"
#include "ccgeo/systems.hpp"
