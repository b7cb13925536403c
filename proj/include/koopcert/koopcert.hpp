#pragma once

#include "koopcert/certificates.hpp"
#include "koopcert/control.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"
#include "koopcert/kedmd.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/linalg.hpp"
#include "koopcert/mercer.hpp"
#include "koopcert/ou_analytic.hpp"
#include "koopcert/rng.hpp"
