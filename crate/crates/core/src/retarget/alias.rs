//! Bone-name equivalence groups for common rigs.

use crate::geometry::normalize_name;

/// A named group of equivalent (normalized) joint names, in preference order.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasGroup {
    pub role: String,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AliasTable {
    pub groups: Vec<AliasGroup>,
}

/// Roles that every retarget map must pair.
pub const MANDATORY_ROLES: &[&str] = &[
    "hips",
    "chest",
    "head",
    "left_upper_arm",
    "left_lower_arm",
    "right_upper_arm",
    "right_lower_arm",
    "left_upper_leg",
    "left_lower_leg",
    "right_upper_leg",
    "right_lower_leg",
];

const PREFIXES: &[&str] = &["mixamorig", "bip001", "bip01", "def"];

/// Normalized name with common rig namespace prefixes removed.
pub fn canonical_name(name: &str) -> String {
    let n = normalize_name(name);
    for p in PREFIXES {
        if let Some(rest) = n.strip_prefix(p) {
            if !rest.is_empty() {
                return rest.to_string();
            }
        }
    }
    n
}

impl AliasTable {
    /// Groups from a user table, each list's first entry doubling as its role name.
    pub fn from_lists(lists: &[Vec<String>]) -> Self {
        AliasTable {
            groups: lists
                .iter()
                .filter(|l| !l.is_empty())
                .map(|l| AliasGroup {
                    role: l[0].clone(),
                    names: l.iter().map(|n| canonical_name(n)).collect(),
                })
                .collect(),
        }
    }

    /// The shipped table covering CMU, Mixamo, Blender-style `.L/.R` and MakeHuman-style rigs.
    pub fn builtin() -> Self {
        let mut groups = vec![
            group("hips", &["hips", "pelvis", "root", "hip", "cog"]),
            group("spine", &["spine", "abdomen", "lowerback", "spine01", "torso", "spine05", "spine04"]),
            group("chest", &["chest", "spine1", "spine2", "upperchest", "chest1", "thorax", "spine3", "spine02", "spine03"]),
            group("neck", &["neck", "neck1", "neck01", "neck02", "upperneck"]),
            group("head", &["head", "skull", "head1"]),
        ];
        for (side, long, short) in [("left", "left", 'l'), ("right", "right", 'r')] {
            let sided = |role: &str, forms: &[&str]| -> AliasGroup {
                let names: Vec<String> = forms
                    .iter()
                    .map(|f| {
                        f.replace("{side}", long)
                            .replace("{s}", &short.to_string())
                    })
                    .collect();
                AliasGroup {
                    role: format!("{side}_{role}"),
                    names,
                }
            };
            groups.push(sided(
                "shoulder",
                &["{side}shoulder", "{s}shoulder", "clavicle{s}", "shoulder{s}", "{s}clavicle", "{side}collar", "{s}collar", "{side}clavicle"],
            ));
            groups.push(sided(
                "upper_arm",
                &["{side}arm", "{side}upperarm", "upperarm{s}", "{s}upperarm", "{s}shldr", "{s}humerus", "{s}arm", "arm{s}", "upperarm01{s}"],
            ));
            groups.push(sided(
                "lower_arm",
                &["{side}forearm", "{side}lowerarm", "forearm{s}", "lowerarm{s}", "{s}forearm", "{s}lowerarm", "{s}radius", "{s}elbow", "lowerarm01{s}"],
            ));
            groups.push(sided("hand", &["{side}hand", "hand{s}", "{s}hand", "{s}wrist", "wrist{s}"]));
            groups.push(sided(
                "upper_leg",
                &["{side}upleg", "{side}upperleg", "thigh{s}", "{side}thigh", "{s}thigh", "upperleg{s}", "{s}upperleg", "{s}femur", "thigh", "upperleg01{s}", "{s}hipjoint"],
            ));
            groups.push(sided(
                "lower_leg",
                &["{side}leg", "{side}lowerleg", "shin{s}", "calf{s}", "{side}shin", "{s}shin", "lowerleg{s}", "{s}lowerleg", "{s}tibia", "{s}knee", "{s}calf", "lowerleg01{s}"],
            ));
            groups.push(sided("foot", &["{side}foot", "foot{s}", "{s}foot", "{s}ankle", "ankle{s}"]));
            groups.push(sided("toe", &["{side}toebase", "{side}toe", "toe{s}", "{s}toe", "toes{s}", "{s}toes", "{side}toes"]));
        }
        // Unsided "thigh" is removed from both sides.
        for g in &mut groups {
            g.names.retain(|n| n != "thigh");
        }
        AliasTable { groups }
    }

    /// User groups take precedence over builtin ones.
    pub fn merged_with_builtin(&self) -> Self {
        let mut groups = self.groups.clone();
        groups.extend(AliasTable::builtin().groups);
        AliasTable { groups }
    }

    /// Role of the first group listing `name`, if any.
    pub fn role_of(&self, name: &str) -> Option<&str> {
        let key = canonical_name(name);
        self.groups
            .iter()
            .find(|g| g.names.contains(&key))
            .map(|g| g.role.as_str())
    }
}

fn group(role: &str, names: &[&str]) -> AliasGroup {
    AliasGroup {
        role: role.to_string(),
        names: names.iter().map(|s| s.to_string()).collect(),
    }
}
