from enum import IntEnum


class JointId(IntEnum):
    """The 32 body landmarks, in their canonical stream order.

    Every keypoint and pose array in pawcap is indexed by these values.
    """
    PELVIS = 0
    SPINE_LOW = 1
    SPINE_MID = 2
    SPINE_HIGH = 3
    NECK = 4
    HEAD = 5
    NOSE = 6
    LEFT_EYE = 7
    RIGHT_EYE = 8
    LEFT_EAR = 9
    RIGHT_EAR = 10
    LEFT_CLAVICLE = 11
    LEFT_SHOULDER = 12
    LEFT_ELBOW = 13
    LEFT_WRIST = 14
    LEFT_HAND = 15
    RIGHT_CLAVICLE = 16
    RIGHT_SHOULDER = 17
    RIGHT_ELBOW = 18
    RIGHT_WRIST = 19
    RIGHT_HAND = 20
    LEFT_HIP = 21
    LEFT_KNEE = 22
    LEFT_ANKLE = 23
    LEFT_FOOT = 24
    LEFT_TOE = 25
    RIGHT_HIP = 26
    RIGHT_KNEE = 27
    RIGHT_ANKLE = 28
    RIGHT_FOOT = 29
    RIGHT_TOE = 30
    HEAD_TOP = 31

    @staticmethod
    def from_name(name: str) -> 'JointId':
        """Look up a joint by its lower-case file name, e.g. 'left_wrist'.

        Raises:
            KeyError: If there is no such joint.
        """
        return JointId[name.upper()]

    @property
    def joint_name(self) -> str:
        """The lower-case name used in files."""
        return self.name.lower()


NUM_JOINTS = len(JointId)
