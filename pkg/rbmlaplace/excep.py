# --------------------------------------------------------------------------- #
#   Rbmlaplace                                                                #
#                                                                             #
#   Copyright (c) 2023 The rbmlaplace authors                                 #
#                                                                             #
#   Licensed under the Apache License, Version 2.0 (the "License");           #
#   you may not use this file except in compliance with the License.          #
#   You may obtain a copy of the License at                                   #
#                                                                             #
#       http://www.apache.org/licenses/LICENSE-2.0                            #
#                                                                             #
#   Unless required by applicable law or agreed to in writing, software       #
#   distributed under the License is distributed on an "AS IS" BASIS,         #
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.  #
#   See the License for the specific language governing permissions and       #
#   limitations under the License.                                            #
# --------------------------------------------------------------------------- #


class RbmExcep(Exception):

    def __init__(self, msg, code=None):
        self.msg = msg
        self.code = code

    def __str__(self):
        return self.msg


# Exit codes used by the command line.
INVALID_PARAMS = 2
NUMERICAL_FAILURE = 3


class InvalidParams(RbmExcep):
    """
    The model parameters (or a parameter file) are not acceptable.

    :param report: optional ValidationReport listing every failed check.
    """

    def __init__(self, msg, report=None):
        super().__init__(msg, code=INVALID_PARAMS)
        self.report = report


class NumericalFailure(RbmExcep):
    """
    A computation did not meet its accuracy contract, or two independent
    routes to the same quantity disagreed.
    """

    def __init__(self, msg, bound=None):
        super().__init__(msg, code=NUMERICAL_FAILURE)
        self.bound = bound


class TangencyError(NumericalFailure):
    """
    The jump function is 0/0 at the vertex of the hyperbola, i.e. we are in
    the regime where the line gamma_1 = 0 is tangent to the kernel ellipse.
    """
    pass


class DomainRefusal(RbmExcep):
    """
    The requested point lies outside the domain on which the operation
    is defined (or is trusted).

    :param distance: optional distance to the offending set, in theta units.
    """

    def __init__(self, msg, distance=None):
        super().__init__(msg, code=NUMERICAL_FAILURE)
        self.distance = distance


class PoleError(DomainRefusal):
    pass


class CutError(DomainRefusal):
    pass
