//! On-disk world layout: the generator config, a scene pool, and the train
//! and validation task files.
//!
//! ```text
//! world/
//!   world.json            generator config (taxonomy included)
//!   scenes/<scene-id>.json
//!   train.jsonl
//!   val.jsonl
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::scene::{
    generate_scenes, generate_tasks, load_tasks, save_tasks, Scene, TaskInstance, WorldConfig,
    WorldError,
};
use crate::util;

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub scenes: BTreeMap<String, Scene>,
    pub train: Vec<TaskInstance>,
    pub val: Vec<TaskInstance>,
}

impl World {
    /// Generate a world: disjoint train and validation scene pools (derived
    /// seeds), then stratified task sets over each pool.
    pub fn generate(
        config: &WorldConfig,
        scenes_per_split: usize,
        train_per_type: usize,
        val_per_type: usize,
        seed: u64,
    ) -> Result<World, WorldError> {
        config.validate()?;
        let train_scenes =
            generate_scenes(config, scenes_per_split, util::derive_seed(seed, &["train-scenes"]))?;
        let val_scenes =
            generate_scenes(config, scenes_per_split, util::derive_seed(seed, &["val-scenes"]))?;
        let train = generate_tasks(
            config,
            &train_scenes,
            train_per_type,
            util::derive_seed(seed, &["train-tasks"]),
        )?;
        let val = generate_tasks(
            config,
            &val_scenes,
            val_per_type,
            util::derive_seed(seed, &["val-tasks"]),
        )?;
        // Task ids must be unique across splits.
        let val = val
            .into_iter()
            .map(|mut t| {
                t.id = format!("val-{}", t.id);
                t
            })
            .collect();
        let mut scenes = BTreeMap::new();
        for s in train_scenes.into_iter().chain(val_scenes) {
            scenes.insert(s.id(), s);
        }
        Ok(World { config: config.clone(), scenes, train, val })
    }

    pub fn save(&self, dir: &Path) -> Result<(), WorldError> {
        std::fs::create_dir_all(dir.join("scenes"))?;
        std::fs::write(dir.join("world.json"), serde_json::to_string_pretty(&self.config)?)?;
        for (id, scene) in &self.scenes {
            scene.save(&dir.join("scenes").join(format!("{id}.json")))?;
        }
        save_tasks(&self.train, &dir.join("train.jsonl"))?;
        save_tasks(&self.val, &dir.join("val.jsonl"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<World, WorldError> {
        let config: WorldConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("world.json"))?)?;
        let mut scenes = BTreeMap::new();
        for entry in std::fs::read_dir(dir.join("scenes"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let scene = Scene::load(&path)?;
                scenes.insert(scene.id(), scene);
            }
        }
        let train = load_tasks(&dir.join("train.jsonl"))?;
        let val = load_tasks(&dir.join("val.jsonl"))?;
        Ok(World { config, scenes, train, val })
    }

    pub fn tasks(&self, split: &str) -> &[TaskInstance] {
        if split == "val" {
            &self.val
        } else {
            &self.train
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_roundtrips_through_a_directory() {
        let config = WorldConfig {
            question_types: vec!["exist".into(), "count".into()],
            ..Default::default()
        };
        let world = World::generate(&config, 12, 4, 3, 5).unwrap();
        assert_eq!(world.train.len(), 8);
        assert_eq!(world.val.len(), 6);
        // Every task references a stored scene.
        for t in world.train.iter().chain(&world.val) {
            assert!(world.scenes.contains_key(&t.scene_ref), "{}", t.scene_ref);
        }
        let dir = tempfile::tempdir().unwrap();
        world.save(dir.path()).unwrap();
        let loaded = World::load(dir.path()).unwrap();
        assert_eq!(loaded.train, world.train);
        assert_eq!(loaded.val, world.val);
        assert_eq!(loaded.scenes.len(), world.scenes.len());
        assert_eq!(loaded.config, world.config);
    }
}
