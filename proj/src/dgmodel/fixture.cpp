#include "covar/dgmodel.hpp"

namespace covar {

const SimplifiedDeltaGamma& fixture_model() {
    static const SimplifiedDeltaGamma model = [] {
        SimplifiedDeltaGamma m;
        m.d = 50;
        m.c1 = 0.0;
        m.c2 = 0.0;
        m.delta1 = {-2.04E-03, -5.56E-04, -3.06E-04, 1.94E-03,  7.03E-04,  1.32E-04,  -1.75E-03, -6.79E-04, 9.27E-04,
                    2.14E-03,  8.05E-04,  -1.58E-03, 4.74E-04,  -2.06E-04, -1.67E-03, -4.66E-04, 6.03E-05,  1.46E-03,
                    3.17E-04,  1.32E-03,  1.96E-03,  -2.95E-03, -1.13E-03, -7.05E-04, -1.14E-03, -2.91E-03, -9.88E-04,
                    5.80E-04,  2.81E-04,  2.67E-03,  2.86E-03,  3.13E-03,  -1.04E-04, 1.03E-03,  5.53E-04,  -1.01E-03,
                    -3.17E-03, 1.16E-03,  -2.26E-04, 1.87E-03,  6.50E-04,  3.38E-03,  1.88E-03,  -3.42E-04, -3.97E-03,
                    1.94E-03,  -1.61E-03, -6.50E-04, -3.70E-04, 1.15E-03};
        m.gamma1 = {-2.70E-02, -1.84E-02, -1.68E-02, -1.25E-02, -1.15E-02, -7.74E-03, -6.71E-03, -5.80E-03, -5.08E-03,
                    -4.45E-03, -3.77E-03, -3.18E-03, -2.35E-03, -1.98E-03, -1.81E-03, -1.17E-03, -1.02E-03, -5.46E-04,
                    -2.82E-04, -2.56E-04, -1.18E-04, -6.98E-05, -3.71E-05, -2.54E-05, -8.86E-07, 8.07E-06,  2.65E-05,
                    8.39E-05,  1.21E-04,  1.25E-04,  3.03E-04,  5.26E-04,  7.85E-04,  9.46E-04,  1.51E-03,  1.60E-03,
                    2.02E-03,  3.13E-03,  3.58E-03,  4.21E-03,  5.03E-03,  6.53E-03,  7.33E-03,  7.93E-03,  1.18E-02,
                    1.43E-02,  1.70E-02,  2.20E-02,  3.28E-02,  3.96E-01};
        m.delta2 = {-4.27E-04, 7.47E-05,  -2.28E-03, -6.62E-04, -1.85E-03, -2.44E-03, -3.18E-03, 1.04E-03,  1.55E-03,
                    -1.54E-03, 1.09E-03,  -1.18E-03, -1.03E-03, 2.03E-04,  -3.03E-03, 6.99E-04,  -2.17E-03, -1.46E-03,
                    1.47E-03,  -6.34E-04, 7.60E-04,  3.49E-05,  -3.45E-04, -4.75E-04, -6.02E-04, -3.13E-04, -9.54E-04,
                    1.49E-03,  -1.65E-03, 1.90E-03,  1.01E-03,  -5.71E-05, 3.75E-04,  1.63E-03,  -9.59E-04, 1.67E-03,
                    3.34E-03,  3.69E-03,  -2.46E-04, 4.85E-03,  9.56E-04,  1.43E-03,  4.48E-03,  3.79E-03,  2.61E-04,
                    4.53E-04,  3.03E-03,  3.88E-03,  2.92E-03,  2.96E-03};
        m.gamma2 = {-5.50E-02, -3.85E-02, -2.79E-02, -2.47E-02, -2.31E-02, -1.59E-02, -1.42E-02, -1.22E-02, -1.01E-02,
                    -8.10E-03, -6.67E-03, -4.35E-03, -3.85E-03, -3.40E-03, -2.78E-03, -1.91E-03, -1.67E-03, -1.02E-03,
                    -8.50E-04, -4.63E-04, -2.59E-04, -2.42E-04, -3.56E-05, -1.69E-05, -9.58E-06, 1.94E-06,  3.31E-05,
                    4.87E-05,  2.78E-04,  5.07E-04,  1.02E-03,  1.33E-03,  1.65E-03,  2.21E-03,  3.32E-03,  4.18E-03,
                    5.12E-03,  6.50E-03,  8.09E-03,  8.95E-03,  1.05E-02,  1.33E-02,  1.45E-02,  1.94E-02,  2.87E-02,
                    3.32E-02,  3.61E-02,  3.93E-02,  5.78E-02,  6.84E-02};
        m.validate();
        return m;
    }();
    return model;
}

}  // namespace covar
